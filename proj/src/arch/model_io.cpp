#include "mrnet/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "mrnet/errors.hpp"

namespace mrnet {

namespace {

constexpr char kMagic[4] = {'M', 'R', 'N', '1'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v); }
  void u32(std::uint32_t v) { le(v); }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  template <class T>
  void le(T v) {
    for (std::size_t k = 0; k < sizeof(T); ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le<std::uint8_t>()); }
  std::uint16_t u16() { return le<std::uint16_t>(); }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::size_t remaining() const { return b_.size() - pos_; }
  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw TruncationError(std::string("model file truncated while reading ") + what);
    }
  }

 private:
  template <class T>
  T le() {
    need(sizeof(T), "scalar");
    T v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<T>(static_cast<T>(b_[pos_ + k]) << (8 * k));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void write_scalars(Writer& w, std::span<const double> xs, Precision p) {
  for (double x : xs) {
    if (p == Precision::f32) {
      w.f32(static_cast<float>(x));
    } else {
      w.f64(x);
    }
  }
}

void read_scalars(Reader& r, std::span<double> xs, Precision p) {
  r.need(xs.size() * static_cast<std::size_t>(p), "layer parameters");
  for (double& x : xs) {
    x = p == Precision::f32 ? static_cast<double>(r.f32()) : r.f64();
    if (!std::isfinite(x)) throw FormatError("model file holds a non-finite parameter");
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_stage(const StageParams& stage, Precision precision) {
  Writer w;
  w.f64(stage.band_limit);
  w.f64(stage.omega_g);
  w.f64(stage.alpha);
  w.u8(stage.frozen ? 1 : 0);
  const auto count = stage.param_count();
  require(count <= 0xFFFFFFFFu, "serialize_stage: stage too large for the file format");
  w.u32(static_cast<std::uint32_t>(count));
  for (const auto* l : stage.layers()) {
    write_scalars(w, l->weights(), precision);
    write_scalars(w, l->bias(), precision);
  }
  return w.take();
}

std::vector<std::uint8_t> serialize_model(const MRNet& net) {
  require(net.num_stages() >= 1 && net.num_stages() <= 65535, "serialize_model: bad stage count");
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(kModelFormatVersion);
  w.u8(static_cast<std::uint8_t>(net.variant));
  w.u8(static_cast<std::uint8_t>(net.precision));
  w.u8(static_cast<std::uint8_t>(net.input_dim));
  w.u8(static_cast<std::uint8_t>(net.channels));
  w.u16(static_cast<std::uint16_t>(net.width));
  w.u16(static_cast<std::uint16_t>(net.num_stages()));
  w.u8(static_cast<std::uint8_t>(net.hidden_layers));
  w.u8(static_cast<std::uint8_t>(net.wiring));
  for (const auto& s : net.stages) w.raw(serialize_stage(s, net.precision));
  return w.take();
}

MRNet deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw TruncationError("model file truncated: missing magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not an MR-Net model file (bad magic)");
  Reader r(bytes.subspan(4));
  const auto version = r.u8();
  if (version != kModelFormatVersion) {
    throw VersionError("unsupported model format version " + std::to_string(version));
  }
  MRNet net;
  const auto variant = r.u8();
  if (variant > 2) throw FormatError("unknown variant tag " + std::to_string(variant));
  net.variant = static_cast<Variant>(variant);
  const auto precision = r.u8();
  if (precision != 4 && precision != 8) throw FormatError("unknown precision tag " + std::to_string(precision));
  net.precision = static_cast<Precision>(precision);
  net.input_dim = r.u8();
  net.channels = r.u8();
  net.width = r.u16();
  const int num_stages = r.u16();
  net.hidden_layers = r.u8();
  const auto wiring = r.u8();
  if (wiring > 1) throw FormatError("unknown wiring tag " + std::to_string(wiring));
  net.wiring = static_cast<Wiring>(wiring);
  if (net.input_dim < 1 || net.channels < 1 || net.width < 1 || num_stages < 1) {
    throw FormatError("model header has a zero dimension");
  }
  if ((net.variant == Variant::S) != (net.hidden_layers == 0)) {
    throw FormatError("hidden layer count inconsistent with variant");
  }

  for (int k = 0; k < num_stages; ++k) {
    StageParams st;
    st.band_limit = r.f64();
    st.omega_g = r.f64();
    st.alpha = r.f64();
    const auto frozen = r.u8();
    if (frozen > 1) throw FormatError("bad frozen flag");
    st.frozen = frozen == 1;
    if (!(st.band_limit > 0.0) || !(st.omega_g > 0.0) || !(st.alpha >= 0.0 && st.alpha <= 1.0)) {
      throw FormatError("stage " + std::to_string(k) + " has invalid band, omega_g or alpha");
    }
    if (k > 0 && !(st.band_limit > net.stages.back().band_limit)) {
      throw FormatError("stage bands are not strictly increasing");
    }
    st.first = DenseLayer(net.input_dim, net.width);
    for (int h = 0; h < net.hidden_layers; ++h) {
      st.hidden.emplace_back(h == 0 ? net.hidden_input_dim(k) : net.width, net.width);
    }
    st.linear = DenseLayer(net.width, net.channels);
    const auto count = r.u32();
    if (count != st.param_count()) {
      throw FormatError("stage " + std::to_string(k) + " parameter count " + std::to_string(count) +
                        " does not match its header (" + std::to_string(st.param_count()) + ")");
    }
    for (auto* l : st.layers()) {
      read_scalars(r, l->weights(), net.precision);
      read_scalars(r, l->bias(), net.precision);
    }
    net.stages.push_back(std::move(st));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after the last stage");
  return net;
}

void save_model(const MRNet& net, const std::filesystem::path& path) {
  const auto bytes = serialize_model(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

MRNet load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFileError("cannot open model file '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace mrnet
