#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace flagopt {

/**
 * @brief Type (n_1, ..., n_d; n) of a real flag manifold Flag(n_1,...,n_d; n).
 *
 * Block layout
 * ============
 * The columns of an n x n orthogonal frame are partitioned into d + 1 blocks
 * of widths b_i = n_i - n_{i-1} (n_0 = 0, n_{d+1} = n). The first d blocks
 * span the successive pieces of the flag; block d + 1 is the complement.
 */
class FlagSignature {
 public:
  FlagSignature() = default;

  FlagSignature(std::vector<int> dims, int ambient)
      : dims_(std::move(dims)), ambient_(ambient) {
    validate();
  }

  FlagSignature(std::initializer_list<int> dims, int ambient)
      : FlagSignature(std::vector<int>(dims), ambient) {}

  /// Number of subspaces in the flag.
  int depth() const { return static_cast<int>(dims_.size()); }
  /// Ambient dimension n.
  int ambient() const { return ambient_; }
  /// n_d, the number of columns of a Stiefel representative.
  int top() const { return dims_.empty() ? 0 : dims_.back(); }
  const std::vector<int>& dims() const { return dims_; }

  /// Cumulative dimension n_i for i = 0, ..., d + 1.
  int cumulative(int i) const {
    if (i <= 0) return 0;
    if (i > depth()) return ambient_;
    return dims_[static_cast<std::size_t>(i - 1)];
  }

  /// Width b_i of block i (0-based, i = 0, ..., d).
  int block_size(int i) const { return cumulative(i + 1) - cumulative(i); }
  /// First column of block i (0-based).
  int block_start(int i) const { return cumulative(i); }
  int num_blocks() const { return depth() + 1; }

  std::vector<int> block_sizes() const {
    std::vector<int> out;
    for (int i = 0; i < num_blocks(); ++i) out.push_back(block_size(i));
    return out;
  }

  /// Throws std::invalid_argument unless 0 < n_1 < ... < n_d < n and d >= 1.
  void validate() const {
    if (dims_.empty()) throw std::invalid_argument("flag signature needs at least one subspace");
    int prev = 0;
    for (int n_i : dims_) {
      if (n_i <= prev) {
        throw std::invalid_argument("flag dimensions must be strictly increasing and positive: " +
                                    to_string());
      }
      prev = n_i;
    }
    if (prev >= ambient_) {
      throw std::invalid_argument("largest flag dimension must be below the ambient dimension: " +
                                  to_string());
    }
  }

  std::string to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
    os << ';' << ambient_ << ')';
    return os.str();
  }

  friend bool operator==(const FlagSignature& a, const FlagSignature& b) {
    return a.ambient_ == b.ambient_ && a.dims_ == b.dims_;
  }
  friend bool operator!=(const FlagSignature& a, const FlagSignature& b) { return !(a == b); }

 private:
  std::vector<int> dims_;
  int ambient_ = 0;
};

inline void validate(const FlagSignature& sig) { sig.validate(); }

/// Manifold dimension sum_{i<j} b_i b_j over the d + 1 blocks.
inline long dimension(const FlagSignature& sig) {
  long total = 0;
  for (int i = 0; i < sig.num_blocks(); ++i)
    for (int j = i + 1; j < sig.num_blocks(); ++j)
      total += static_cast<long>(sig.block_size(i)) * sig.block_size(j);
  return total;
}

/// Block index (0-based, 0..d) that contains row/column `k` of an n x n frame.
inline int block_of(const FlagSignature& sig, int k) {
  for (int i = 0; i < sig.depth(); ++i)
    if (k < sig.cumulative(i + 1)) return i;
  return sig.depth();
}

}  // namespace flagopt
