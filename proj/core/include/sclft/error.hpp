#pragma once

#include <stdexcept>
#include <string>

namespace sclft {

enum class Errc {
  zero_vector,
  degenerate_data,
  shape_mismatch,
  invalid_temperature,
  invalid_pairing,
  invalid_argument,
  parse_error,
  unknown_label,
  empty_file,
  empty_dataset,
  too_few_examples,
  insufficient_runs,
  io_error,
  corrupted_checkpoint,
  version_mismatch,
  config_mismatch,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

  /// True for errors caused by bad input data (files, records, labels),
  /// as opposed to programming/usage errors. Drives the CLI exit code.
  bool is_data_error() const noexcept {
    switch (code_) {
      case Errc::parse_error:
      case Errc::unknown_label:
      case Errc::empty_file:
      case Errc::empty_dataset:
      case Errc::too_few_examples:
      case Errc::insufficient_runs:
      case Errc::io_error:
      case Errc::corrupted_checkpoint:
      case Errc::version_mismatch:
      case Errc::config_mismatch:
        return true;
      default:
        return false;
    }
  }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) raise(code, what);
}

}  // namespace sclft
