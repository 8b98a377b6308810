#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace adalab {

enum class ErrorKind { Shape, Index, Contract, Numeric, Budget, Validation, Io, Checksum };

class LabError : public std::runtime_error {
 public:
  LabError(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

struct ShapeError : LabError {
  explicit ShapeError(const std::string& m) : LabError(ErrorKind::Shape, m) {}
};
struct IndexError : LabError {
  explicit IndexError(const std::string& m) : LabError(ErrorKind::Index, m) {}
};
struct ContractError : LabError {
  explicit ContractError(const std::string& m) : LabError(ErrorKind::Contract, m) {}
};
struct NumericError : LabError {
  explicit NumericError(const std::string& m) : LabError(ErrorKind::Numeric, m) {}
};
struct BudgetError : LabError {
  explicit BudgetError(const std::string& m) : LabError(ErrorKind::Budget, m) {}
};
struct ValidationError : LabError {
  explicit ValidationError(const std::string& m) : LabError(ErrorKind::Validation, m) {}
};
struct IoError : LabError {
  explicit IoError(const std::string& m) : LabError(ErrorKind::Io, m) {}
};
struct ChecksumError : LabError {
  explicit ChecksumError(const std::string& m) : LabError(ErrorKind::Checksum, m) {}
};

uint64_t splitmix64(uint64_t x);

// Independent engine from (seed, tags...). Same inputs give the same stream,
// so sub-generators can be forked without disturbing the parent.
std::mt19937_64 derive_rng(uint64_t seed, std::initializer_list<uint64_t> tags = {});
uint64_t derive_seed(uint64_t seed, std::initializer_list<uint64_t> tags);

// FNV-1a 64-bit, used for all content hashes.
uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 14695981039346656037ULL);
std::string hex64(uint64_t v);
std::string hash_bytes_hex(const std::string& bytes);
std::string hash_file_hex(const std::string& path);

// Worker count for parallel sections: LABCTL_WORKERS env var, else
// hardware_concurrency.
int env_worker_count();

// Runs f(i) for i in [0, n). Results must be written to index-addressed slots
// so the outcome is independent of scheduling.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& f);

}  // namespace adalab
