#include "sigmalr/manifest.hpp"

#include "sigmalr/error.hpp"
#include "sigmalr/npy.hpp"

#include <fstream>
#include <set>

namespace sigmalr {

namespace fs = std::filesystem;

std::string to_string(LayerKind k) { return k == LayerKind::conv ? "conv" : "linear"; }

LayerKind parse_layer_kind(const std::string& s) {
  if (s == "conv") return LayerKind::conv;
  if (s == "linear") return LayerKind::linear;
  throw ValidationError("unknown layer kind '" + s + "' (expected conv or linear)");
}

Index LayerEntry::input_dim() const {
  return kind == LayerKind::conv ? dims[1] * dims[2] * dims[3] : dims[1];
}

Index LayerEntry::parameter_count() const {
  Index n = 1;
  for (Index d : dims) n *= d;
  return n;
}

Dims4 LayerEntry::conv_dims() const {
  require(kind == LayerKind::conv, "layer '" + name + "' is not a conv layer");
  return {dims[0], dims[1], dims[2], dims[3]};
}

void ModelManifest::validate() const {
  require(!layers.empty(), "manifest: no layers");
  std::set<std::string> seen;
  for (const LayerEntry& l : layers) {
    require(!l.name.empty(), "manifest: layer with empty name");
    require(l.name.find_first_of("/\\") == std::string::npos && l.name != "." && l.name != "..",
            "manifest: layer name '" + l.name + "' cannot be used as a file name prefix");
    require(seen.insert(l.name).second, "manifest: duplicate layer name '" + l.name + "'");
    const std::size_t want = l.kind == LayerKind::conv ? 4 : 2;
    require(l.dims.size() == want, "manifest: layer '" + l.name + "' (" + to_string(l.kind) + ") needs " +
                                       std::to_string(want) + " dims");
    for (Index d : l.dims) require(d >= 1, "manifest: layer '" + l.name + "' has a non-positive dim");
    require(!l.kernel_file.empty(), "manifest: layer '" + l.name + "' has no kernel_file");
    if (l.ranks) {
      const std::size_t n = l.ranks->size();
      require(n == 1 || n == 2, "manifest: layer '" + l.name + "' ranks must have 1 or 2 entries");
      for (Index r : *l.ranks) require(r >= 1, "manifest: layer '" + l.name + "' has a rank < 1");
    }
  }
}

fs::path ModelManifest::resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

namespace {

std::optional<fs::path> opt_path(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return fs::path(j.at(key).get<std::string>());
}

}  // namespace

ModelManifest ModelManifest::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  ModelManifest m;
  m.base_dir = base_dir;
  try {
    m.model = j.value("model", std::string());
    for (const auto& e : j.at("layers")) {
      LayerEntry l;
      l.name = e.at("name").get<std::string>();
      l.kind = parse_layer_kind(e.value("kind", std::string("conv")));
      l.kernel_file = e.at("kernel_file").get<std::string>();
      l.dims = e.at("dims").get<std::vector<Index>>();
      l.patches_file = opt_path(e, "patches_file");
      l.eval_patches_file = opt_path(e, "eval_patches_file");
      l.sigma_file = opt_path(e, "sigma_file");
      l.weights_file = opt_path(e, "weights_file");
      if (e.contains("ranks") && !e.at("ranks").is_null()) l.ranks = e.at("ranks").get<std::vector<Index>>();
      l.skip = e.value("skip", false);
      m.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("manifest: ") + ex.what());
  }
  m.validate();
  return m;
}

ModelManifest ModelManifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("manifest '" + path.string() + "': " + ex.what());
  }
  ModelManifest m = from_json(j, fs::absolute(path).parent_path());
  m.source = fs::absolute(path).lexically_normal();
  return m;
}

nlohmann::json ModelManifest::to_json() const {
  nlohmann::json layers_j = nlohmann::json::array();
  for (const LayerEntry& l : layers) {
    nlohmann::json e{{"name", l.name},
                     {"kind", to_string(l.kind)},
                     {"kernel_file", l.kernel_file.string()},
                     {"dims", l.dims},
                     {"skip", l.skip}};
    if (l.patches_file) e["patches_file"] = l.patches_file->string();
    if (l.eval_patches_file) e["eval_patches_file"] = l.eval_patches_file->string();
    if (l.sigma_file) e["sigma_file"] = l.sigma_file->string();
    if (l.weights_file) e["weights_file"] = l.weights_file->string();
    if (l.ranks) e["ranks"] = *l.ranks;
    layers_j.push_back(std::move(e));
  }
  return {{"model", model}, {"layers", std::move(layers_j)}};
}

void ModelManifest::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << to_json().dump(2) << '\n';
}

}  // namespace sigmalr
