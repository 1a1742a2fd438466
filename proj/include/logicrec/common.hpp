#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace logicrec {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

/// Sorted, duplicate-free list of entity ids.
using IdSet = std::vector<EntityId>;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `position` is a 1-based line number for files and a
/// 0-based byte offset for query strings.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

class UnknownSymbolError : public Error {
public:
  using Error::Error;
};

class SplitInfeasibleError : public Error {
public:
  using Error::Error;
};

class SamplingFailure : public Error {
public:
  using Error::Error;
};

/// Shape or precondition violation inside the numeric engine.
class ContractViolation : public Error {
public:
  using Error::Error;
};

class NumericFailure : public Error {
public:
  using Error::Error;
};

/// Checkpoint/data disagreement (vocabulary hash, tensor shapes).
class ArtifactMismatch : public Error {
public:
  using Error::Error;
};

/// FNV-1a 64-bit. Stable across platforms and runs; used for content and
/// vocabulary fingerprints, never for security.
class Fnv1a {
public:
  void update(std::string_view bytes) noexcept {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  void update_separator() noexcept { update(std::string_view("\0", 1)); }
  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const;

private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

// Set algebra over sorted id vectors.
IdSet set_intersection(const IdSet& a, const IdSet& b);
IdSet set_union(const IdSet& a, const IdSet& b);
IdSet set_difference(const IdSet& a, const IdSet& b);
bool contains(const IdSet& set, EntityId id);
void normalize(IdSet& ids);

}  // namespace logicrec
