#include "asymnet/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "asymnet/errors.hpp"

namespace asymnet {

namespace {

constexpr std::uint8_t kNoProfile = 0xFF;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) u8(static_cast<std::uint8_t>(v >> (8 * b)));
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) u8(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * b);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * b);
    return std::bit_cast<double>(bits);
  }
  std::string raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw FormatError("model file truncated at byte " + std::to_string(pos_));
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

void write_shape(Writer& w, const Shape& s) {
  w.u32(static_cast<std::uint32_t>(s.size()));
  for (auto e : s) w.u32(static_cast<std::uint32_t>(e));
}

Shape read_shape(Reader& r) {
  const auto rank = r.u32();
  if (rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank));
  Shape s(rank);
  for (auto& e : s) e = r.u32();
  return s;
}

Tensor read_tensor(Reader& r, const Shape& shape) {
  std::vector<double> data(shape_size(shape));
  for (auto& v : data) v = r.f64();
  return Tensor(shape, std::move(data));
}

}  // namespace

std::string serialize_model(const Network& net) {
  Writer w;
  w.raw("ASYM", 4);
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(net.size()));
  write_shape(w, net.input_shape());
  for (const auto& l : net.layers()) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u8(static_cast<std::uint8_t>(l.base));
    w.u8(static_cast<std::uint8_t>(l.padding));
    w.u8(l.profile ? static_cast<std::uint8_t>(l.profile->schedule) : kNoProfile);
    write_shape(w, l.weights.shape());
    const auto n_profile = l.profile ? l.profile->size() : 0;
    w.u32(static_cast<std::uint32_t>(n_profile));
    if (l.profile)
      for (double s : l.profile->values) w.f64(s);
    for (double v : l.weights.values()) w.f64(v);
    for (double v : l.bias.values()) w.f64(v);
  }
  return w.take();
}

Network deserialize_model(const std::string& bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "ASYM") throw FormatError("not a model file (bad magic)");
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version) + " (expected " +
                      std::to_string(kModelFormatVersion) + ")");
  }
  const auto count = r.u32();
  const Shape input = read_shape(r);
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    Layer l;
    const auto kind = r.u8();
    const auto base = r.u8();
    const auto padding = r.u8();
    const auto schedule = r.u8();
    if (kind > 3 || base > 4 || padding > 1 || (schedule > 3 && schedule != kNoProfile)) {
      throw FormatError("corrupt header for layer " + std::to_string(i));
    }
    l.kind = static_cast<LayerKind>(kind);
    l.base = static_cast<Activation>(base);
    l.padding = static_cast<Padding>(padding);
    const Shape wshape = read_shape(r);
    const auto n_profile = r.u32();
    if (schedule != kNoProfile) {
      SensitivityProfile p;
      p.schedule = static_cast<Schedule>(schedule);
      p.values.resize(n_profile);
      for (auto& s : p.values) s = r.f64();
      l.profile = std::move(p);
    } else if (n_profile != 0) {
      throw FormatError("layer " + std::to_string(i) + " has profile values but no schedule");
    }
    if (!wshape.empty()) {
      l.weights = read_tensor(r, wshape);
      l.bias = read_tensor(r, Shape{wshape[0]});
    }
    layers.push_back(std::move(l));
  }
  if (!r.done()) throw FormatError("trailing bytes after model");
  try {
    return Network(input, std::move(layers));
  } catch (const Error& e) {
    throw FormatError(std::string("model file describes an invalid network: ") + e.what());
  }
}

void save_model(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write model file " + path.string());
  const auto bytes = serialize_model(net);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing model file " + path.string());
}

Network load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace asymnet
