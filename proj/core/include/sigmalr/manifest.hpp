#pragma once

// Model manifest: the list of layers to compress and where their tensors
// live. Relative paths resolve against the manifest's directory.
//
//   {"model": "toy",
//    "layers": [{"name": "conv1", "kind": "conv", "kernel_file": "conv1.npy",
//                "dims": [16, 3, 3, 3], "skip": true},
//               {"name": "conv2", "kind": "conv", "kernel_file": "conv2.npy",
//                "dims": [32, 16, 3, 3], "patches_file": "conv2.patches.npy"}]}
//
// Optional per-layer keys: patches_file (S*H*W x N, or n x N for linear),
// eval_patches_file (held-out patches for the functional error),
// sigma_file, weights_file (element weights for wals), ranks (overrides
// the planned ranks).

#include "sigmalr/tensor.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sigmalr {

enum class LayerKind { conv, linear };

std::string to_string(LayerKind k);
LayerKind parse_layer_kind(const std::string& s);

struct LayerEntry {
  std::string name;
  LayerKind kind = LayerKind::conv;
  std::filesystem::path kernel_file;
  std::vector<Index> dims;  // conv: T,S,H,W; linear: m,n
  std::optional<std::filesystem::path> patches_file;
  std::optional<std::filesystem::path> eval_patches_file;
  std::optional<std::filesystem::path> sigma_file;
  std::optional<std::filesystem::path> weights_file;
  std::optional<std::vector<Index>> ranks;
  bool skip = false;

  /// Column dimension of the layer's input patches (S*H*W or n).
  Index input_dim() const;
  Index parameter_count() const;
  Dims4 conv_dims() const;
};

struct ModelManifest {
  std::string model;
  std::vector<LayerEntry> layers;
  std::filesystem::path base_dir;
  std::filesystem::path source;  // absolute path of the file it was loaded from, if any

  void validate() const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;

  static ModelManifest from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static ModelManifest load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;
};

}  // namespace sigmalr
