// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint layout, all integers little-endian:
//   "SGNK" | u32 version | u32 n | n bytes JSON {config, precision, step}
//   | u32 tensor count | per tensor: u32 name length, name, u8 dtype (0 f32,
//   1 f64), u32 rank, rank × u64 dims, payload | u32 CRC32 of everything before.
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "sgn/errors.hpp"
#include "sgn/model.hpp"

namespace sgn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'G', 'N', 'K'};

template <typename Real>
constexpr std::uint8_t dtype_tag() {
  return std::is_same_v<Real, float> ? 0 : 1;
}

std::uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large buffers.
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IntegrityError("checkpoint truncated");
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

struct Header {
  ModelConfig config;
  Precision precision = Precision::f32;
  std::uint64_t step = 0;
};

// Validates magic, version and checksum; returns the body without the trailer.
std::string_view checked_body(std::string_view bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IntegrityError("not a checkpoint (bad magic)");
  }
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (crc_of(body) != stored) throw IntegrityError("checkpoint checksum mismatch");
  return body;
}

Header read_header(Reader& r) {
  r.take(8);
  const auto n = r.get<std::uint32_t>();
  Header h;
  try {
    const auto j = nlohmann::json::parse(r.take(n));
    h.config = model_config_from_json(j.at("config"));
    const std::string p = j.at("precision").get<std::string>();
    if (p != "f32" && p != "f64") throw IntegrityError("checkpoint precision '" + p + "'");
    h.precision = p == "f32" ? Precision::f32 : Precision::f64;
    h.step = j.at("step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint header: ") + e.what());
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

template <typename Real>
std::string serialize_checkpoint(const Model<Real>& model) {
  if (!model.initialized()) throw StateError("cannot save an uninitialized model");
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  nlohmann::ordered_json header;
  header["config"] = to_json(model.config());
  header["precision"] = std::is_same_v<Real, float> ? "f32" : "f64";
  header["step"] = model.step();
  const std::string text = header.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.tensors().size()));
  for (const auto& t : model.tensors()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint8_t>(out, dtype_tag<Real>());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t d : t.value.shape()) put<std::uint64_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.value.data().data()), t.value.size() * sizeof(Real));
  }
  put<std::uint32_t>(out, crc_of(out));
  return out;
}

template <typename Real>
Model<Real> deserialize_checkpoint(std::string_view bytes) {
  Reader r(checked_body(bytes));
  const Header h = read_header(r);
  const auto layout = tensor_layout(h.config);
  const auto count = r.get<std::uint32_t>();
  if (count != layout.size()) {
    throw SchemaError("checkpoint holds " + std::to_string(count) + " tensors, config expects " +
                      std::to_string(layout.size()));
  }
  std::vector<NamedTensor<Real>> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor<Real> t;
    t.name = std::string(r.take(r.get<std::uint32_t>()));
    t.role = layout[i].role;
    const auto tag = r.get<std::uint8_t>();
    if (tag > 1) throw IntegrityError("checkpoint tensor '" + t.name + "' has dtype tag " + std::to_string(tag));
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    const std::size_t n = numel(shape);
    const std::string_view payload = r.take(n * (tag == 0 ? sizeof(float) : sizeof(double)));
    std::vector<Real> values(n);
    if (tag == 0) {
      std::vector<float> raw(n);
      std::memcpy(raw.data(), payload.data(), payload.size());
      std::copy(raw.begin(), raw.end(), values.begin());
    } else {
      std::vector<double> raw(n);
      std::memcpy(raw.data(), payload.data(), payload.size());
      std::transform(raw.begin(), raw.end(), values.begin(), [](double v) { return static_cast<Real>(v); });
    }
    t.value = Tensor<Real>(shape, std::move(values));
    tensors.push_back(std::move(t));
  }
  if (!r.done()) throw IntegrityError("checkpoint has trailing bytes");
  return Model<Real>(h.config, std::move(tensors), h.step);
}

template <typename Real>
void save_checkpoint(const Model<Real>& model, const std::string& path) {
  const std::string bytes = serialize_checkpoint(model);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw DataError("write failed for checkpoint '" + path + "'");
    }
  }
  std::filesystem::rename(tmp, path);
}

template <typename Real>
Model<Real> load_checkpoint(const std::string& path) {
  return deserialize_checkpoint<Real>(read_file(path));
}

Precision checkpoint_precision(const std::string& path) {
  const std::string bytes = read_file(path);
  Reader r(checked_body(bytes));
  return read_header(r).precision;
}

template <typename Real>
std::uint32_t model_checksum(const Model<Real>& model) {
  // The trailer is the CRC of everything before it.
  const std::string bytes = serialize_checkpoint(model);
  std::uint32_t crc;
  std::memcpy(&crc, bytes.data() + bytes.size() - 4, 4);
  return crc;
}

#define SGN_INSTANTIATE_CHECKPOINT(R)                                      \
  template std::string serialize_checkpoint<R>(const Model<R>&);           \
  template Model<R> deserialize_checkpoint<R>(std::string_view);           \
  template void save_checkpoint<R>(const Model<R>&, const std::string&);   \
  template Model<R> load_checkpoint<R>(const std::string&);                \
  template std::uint32_t model_checksum<R>(const Model<R>&);

SGN_INSTANTIATE_CHECKPOINT(float)
SGN_INSTANTIATE_CHECKPOINT(double)

}  // namespace sgn
