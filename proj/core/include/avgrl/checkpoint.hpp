#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "avgrl/nn.hpp"
#include "avgrl/norm.hpp"
#include "avgrl/optim.hpp"
#include "avgrl/rng.hpp"

namespace avgrl::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Length-prefixed binary stream. Doubles are stored as raw IEEE-754 bytes so
// save/load round-trips are bit-exact.
class Writer {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void boolean(bool v);
  void str(const std::string& v);
  void vec(const Eigen::VectorXd& v);
  void arr(const Eigen::ArrayXd& v);
  // Nested named section with a byte-length prefix.
  void section(const std::string& name, const Writer& nested);

  const std::string& data() const { return buf_; }

 private:
  void raw(const void* p, std::size_t n);
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  bool boolean();
  std::string str();
  Eigen::VectorXd vec();
  Eigen::ArrayXd arr();
  // Reads the next section; throws SchemaError when the name differs.
  Reader section(const std::string& expected_name);
  bool at_end() const { return offset_ == data_.size(); }

 private:
  const char* take(std::size_t n);
  std::string_view data_;
  std::size_t offset_ = 0;
};

// Whole-file envelope: magic + format version + one root section.
void save_file(const std::string& path, const Writer& root);
std::string load_file(const std::string& path);

// Core-type codecs.
void write_params(Writer& w, const nn::ParamBundle& p);
nn::ParamBundle read_params(Reader& r);
void write_adam(Writer& w, const optim::AdamState& s);
optim::AdamState read_adam(Reader& r);
void write_running_stat(Writer& w, const norm::RunningStat& s);
norm::RunningStat read_running_stat(Reader& r);
void write_td_scale(Writer& w, const norm::TdScaleState& s);
norm::TdScaleState read_td_scale(Reader& r);
void write_rng(Writer& w, const Rng& rng);
Rng read_rng(Reader& r);

}  // namespace avgrl::checkpoint
