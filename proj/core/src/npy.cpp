#include "sigmalr/npy.hpp"

#include "sigmalr/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sigmalr {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

static_assert(std::endian::native == std::endian::little, "npy I/O assumes a little-endian host");

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// Value text for `key` inside the header dict: a quoted string, a bare word,
// or a parenthesised tuple.
std::string dict_value(const std::string& header, const std::string& key) {
  std::size_t k = header.find("'" + key + "'");
  if (k == std::string::npos) k = header.find("\"" + key + "\"");
  if (k == std::string::npos) throw ValidationError("npy: header is missing key '" + key + "'");
  std::size_t colon = header.find(':', k);
  if (colon == std::string::npos) throw ValidationError("npy: malformed header near '" + key + "'");
  std::size_t i = header.find_first_not_of(" \t", colon + 1);
  if (i == std::string::npos) throw ValidationError("npy: malformed header near '" + key + "'");
  if (header[i] == '\'' || header[i] == '"') {
    const char q = header[i];
    const std::size_t end = header.find(q, i + 1);
    if (end == std::string::npos) throw ValidationError("npy: unterminated string in header");
    return header.substr(i + 1, end - i - 1);
  }
  if (header[i] == '(') {
    const std::size_t end = header.find(')', i);
    if (end == std::string::npos) throw ValidationError("npy: unterminated shape tuple");
    return header.substr(i, end - i + 1);
  }
  const std::size_t end = header.find_first_of(",}", i);
  return trim(header.substr(i, end - i));
}

std::vector<Index> parse_shape(const std::string& tuple) {
  std::vector<Index> shape;
  std::string inner = tuple.substr(1, tuple.size() - 2);
  std::stringstream ss(inner);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      throw ValidationError("npy: invalid shape entry '" + item + "'");
    }
    if (used != item.size() || v < 0) throw ValidationError("npy: invalid shape entry '" + item + "'");
    shape.push_back(static_cast<Index>(v));
  }
  return shape;
}

std::string shape_tuple(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  if (shape.size() == 1) os << ',';
  os << ')';
  return os.str();
}

}  // namespace

Index NpyArray::numel() const {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

NpyArray parse_npy(const std::string& bytes) {
  if (bytes.size() < kMagicLen + 4 || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
    throw ValidationError("npy: bad magic bytes");
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  if (major == 1) {
    std::uint16_t len = 0;
    std::memcpy(&len, bytes.data() + 8, 2);
    header_len = len;
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw ValidationError("npy: truncated header");
    std::uint32_t len = 0;
    std::memcpy(&len, bytes.data() + 8, 4);
    header_len = len;
    offset = 12;
  } else {
    throw ValidationError("npy: unsupported format version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) throw ValidationError("npy: truncated header");
  const std::string header = bytes.substr(offset, header_len);

  NpyArray arr;
  arr.dtype = dict_value(header, "descr");
  const std::string fortran = dict_value(header, "fortran_order");
  if (fortran == "True") throw ValidationError("npy: fortran_order=True arrays are not supported");
  if (fortran != "False") throw ValidationError("npy: invalid fortran_order value '" + fortran + "'");
  arr.shape = parse_shape(dict_value(header, "shape"));

  std::size_t width = 0;
  if (arr.dtype == "<f8") {
    width = 8;
  } else if (arr.dtype == "<f4") {
    width = 4;
  } else {
    throw ValidationError("npy: unsupported dtype '" + arr.dtype + "' (expected <f4 or <f8)");
  }

  const auto n = static_cast<std::size_t>(arr.numel());
  const std::size_t data_off = offset + header_len;
  if (bytes.size() != data_off + n * width)
    throw ValidationError("npy: payload size does not match shape " + shape_tuple(arr.shape));
  arr.data.resize(n);
  if (width == 8) {
    std::memcpy(arr.data.data(), bytes.data() + data_off, n * 8);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      float f = 0.0f;
      std::memcpy(&f, bytes.data() + data_off + i * 4, 4);
      arr.data[i] = static_cast<double>(f);
    }
  }
  return arr;
}

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_npy(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string serialize_npy(const std::vector<Index>& shape, std::span<const double> data) {
  Index n = 1;
  for (Index d : shape) {
    require(d >= 0, "npy: negative shape entry");
    n *= d;
  }
  require(static_cast<Index>(data.size()) == n, "npy: data length does not match shape");

  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': " + shape_tuple(shape) + ", }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::string out(kMagic, kMagicLen);
  out.push_back('\x01');
  out.push_back('\x00');
  const auto len = static_cast<std::uint16_t>(header.size());
  out.append(reinterpret_cast<const char*>(&len), 2);
  out += header;
  out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
  return out;
}

void write_npy(const std::filesystem::path& path, const std::vector<Index>& shape, std::span<const double> data) {
  const std::string bytes = serialize_npy(shape, data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

TensorValue read_tensor(const std::filesystem::path& path) {
  NpyArray a = read_npy(path);
  if (a.shape.size() == 4) {
    const Dims4 d{a.shape[0], a.shape[1], a.shape[2], a.shape[3]};
    require(d.size() > 0, path.string() + ": tensor has an empty dimension");
    return Tensor4(d, std::move(a.data));
  }
  if (a.shape.size() == 2) {
    require(a.shape[0] > 0 && a.shape[1] > 0, path.string() + ": matrix has an empty dimension");
    Mat m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.data.data(), a.shape[0], a.shape[1]);
    return m;
  }
  throw ValidationError(path.string() + ": expected a 2-D or 4-D array, got " + std::to_string(a.shape.size()) +
                        "-D");
}

Tensor4 read_tensor4(const std::filesystem::path& path) {
  TensorValue v = read_tensor(path);
  if (auto* t = std::get_if<Tensor4>(&v)) return std::move(*t);
  throw ValidationError(path.string() + ": expected a 4-D array");
}

Mat read_matrix(const std::filesystem::path& path) {
  TensorValue v = read_tensor(path);
  if (auto* m = std::get_if<Mat>(&v)) return std::move(*m);
  throw ValidationError(path.string() + ": expected a 2-D array");
}

void write_tensor(const std::filesystem::path& path, const Tensor4& t) {
  const Dims4 d = t.dims();
  write_npy(path, {d.T, d.S, d.H, d.W}, t.data());
}

void write_tensor(const std::filesystem::path& path, const Mat& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  write_npy(path, {m.rows(), m.cols()}, std::span<const double>(rm.data(), static_cast<std::size_t>(rm.size())));
}

void write_tensor(const std::filesystem::path& path, const TensorValue& v) {
  std::visit([&](const auto& x) { write_tensor(path, x); }, v);
}

}  // namespace sigmalr
