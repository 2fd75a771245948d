#include "avgrl/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace avgrl::checkpoint {

namespace {
constexpr char kMagic[8] = {'A', 'V', 'G', 'C', 'K', 'P', 'T', '1'};
}

void Writer::raw(const void* p, std::size_t n) {
  buf_.append(static_cast<const char*>(p), n);
}

void Writer::u32(std::uint32_t v) { raw(&v, sizeof v); }
void Writer::u64(std::uint64_t v) { raw(&v, sizeof v); }
void Writer::i64(std::int64_t v) { raw(&v, sizeof v); }
void Writer::f64(double v) { raw(&v, sizeof v); }
void Writer::boolean(bool v) { u32(v ? 1 : 0); }

void Writer::str(const std::string& v) {
  u64(v.size());
  raw(v.data(), v.size());
}

void Writer::vec(const Eigen::VectorXd& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  raw(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

void Writer::arr(const Eigen::ArrayXd& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  raw(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

void Writer::section(const std::string& name, const Writer& nested) {
  str(name);
  str(nested.buf_);
}

const char* Reader::take(std::size_t n) {
  if (offset_ + n > data_.size())
    throw SchemaError("checkpoint truncated: wanted " + std::to_string(n) +
                      " bytes at offset " + std::to_string(offset_));
  const char* p = data_.data() + offset_;
  offset_ += n;
  return p;
}

std::uint32_t Reader::u32() {
  std::uint32_t v;
  std::memcpy(&v, take(sizeof v), sizeof v);
  return v;
}

std::uint64_t Reader::u64() {
  std::uint64_t v;
  std::memcpy(&v, take(sizeof v), sizeof v);
  return v;
}

std::int64_t Reader::i64() {
  std::int64_t v;
  std::memcpy(&v, take(sizeof v), sizeof v);
  return v;
}

double Reader::f64() {
  double v;
  std::memcpy(&v, take(sizeof v), sizeof v);
  return v;
}

bool Reader::boolean() { return u32() != 0; }

std::string Reader::str() {
  const std::uint64_t n = u64();
  return {take(n), n};
}

Eigen::VectorXd Reader::vec() {
  const std::uint64_t n = u64();
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  std::memcpy(v.data(), take(n * sizeof(double)), n * sizeof(double));
  return v;
}

Eigen::ArrayXd Reader::arr() {
  const std::uint64_t n = u64();
  Eigen::ArrayXd v(static_cast<Eigen::Index>(n));
  std::memcpy(v.data(), take(n * sizeof(double)), n * sizeof(double));
  return v;
}

Reader Reader::section(const std::string& expected_name) {
  const std::string name = str();
  if (name != expected_name)
    throw SchemaError("checkpoint section mismatch: expected '" +
                      expected_name + "', found '" + name + "'");
  // The payload view must outlive this reader; sections reference the parent
  // buffer, which callers keep alive for the whole load.
  const std::uint64_t n = u64();
  const char* p = take(n);
  return Reader(std::string_view(p, n));
}

void save_file(const std::string& path, const Writer& root) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for write: " + path);
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  const std::uint64_t size = root.data().size();
  out.write(reinterpret_cast<const char*>(&size), sizeof size);
  out.write(root.data().data(), static_cast<std::streamsize>(size));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

std::string load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw SchemaError("not a checkpoint file: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || version != kFormatVersion)
    throw SchemaError("checkpoint format version " + std::to_string(version) +
                      " unsupported (expected " +
                      std::to_string(kFormatVersion) + ")");
  std::uint64_t size = 0;
  in.read(reinterpret_cast<char*>(&size), sizeof size);
  if (!in) throw SchemaError("checkpoint truncated: missing payload size");
  std::string payload(size, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(size));
  if (static_cast<std::uint64_t>(in.gcount()) != size)
    throw SchemaError("checkpoint truncated: payload shorter than declared");
  return payload;
}

void write_params(Writer& w, const nn::ParamBundle& p) {
  w.u64(p.layout.size());
  for (const auto& l : p.layout) {
    w.u32(static_cast<std::uint32_t>(l.rows));
    w.u32(static_cast<std::uint32_t>(l.cols));
    w.u64(l.w_offset);
    w.u64(l.b_offset);
  }
  w.vec(p.values);
}

nn::ParamBundle read_params(Reader& r) {
  nn::ParamBundle p;
  const std::uint64_t n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    nn::LayerLayout l;
    l.rows = static_cast<int>(r.u32());
    l.cols = static_cast<int>(r.u32());
    l.w_offset = r.u64();
    l.b_offset = r.u64();
    p.layout.push_back(l);
  }
  p.values = r.vec();
  return p;
}

void write_adam(Writer& w, const optim::AdamState& s) {
  w.vec(s.m);
  w.vec(s.v);
  w.i64(s.t);
  w.f64(s.beta1);
  w.f64(s.beta2);
  w.f64(s.lr);
  w.f64(s.eps);
  w.u32(s.mode == optim::Mode::kAdam ? 0 : 1);
}

optim::AdamState read_adam(Reader& r) {
  optim::AdamState s;
  s.m = r.vec();
  s.v = r.vec();
  s.t = r.i64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.lr = r.f64();
  s.eps = r.f64();
  s.mode = r.u32() == 0 ? optim::Mode::kAdam : optim::Mode::kRawSgd;
  return s;
}

void write_running_stat(Writer& w, const norm::RunningStat& s) {
  w.i64(s.n);
  w.arr(s.shift);
  w.arr(s.mu);
  w.arr(s.m2);
}

norm::RunningStat read_running_stat(Reader& r) {
  norm::RunningStat s;
  s.n = r.i64();
  s.shift = r.arr();
  s.mu = r.arr();
  s.m2 = r.arr();
  return s;
}

void write_td_scale(Writer& w, const norm::TdScaleState& s) {
  write_running_stat(w, s.stat_r);
  write_running_stat(w, s.stat_gamma);
  write_running_stat(w, s.stat_g2);
  w.f64(s.episode_return);
  w.f64(s.sigma_delta);
}

norm::TdScaleState read_td_scale(Reader& r) {
  norm::TdScaleState s;
  s.stat_r = read_running_stat(r);
  s.stat_gamma = read_running_stat(r);
  s.stat_g2 = read_running_stat(r);
  s.episode_return = r.f64();
  s.sigma_delta = r.f64();
  return s;
}

void write_rng(Writer& w, const Rng& rng) { w.str(rng.to_string()); }

Rng read_rng(Reader& r) { return Rng::from_string(r.str()); }

}  // namespace avgrl::checkpoint
