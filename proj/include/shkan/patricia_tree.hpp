#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shkan/basis.hpp"
#include "shkan/binary_io.hpp"
#include "shkan/codec.hpp"

namespace shkan {

struct PredictResult {
  std::vector<double> y;      // one entry per output dimension
  std::vector<double> dy_du;  // derivative of y with respect to the unit position
};

/// Work counters for a single traversal.
struct PathCost {
  std::uint64_t nodes = 0;  // tree nodes visited
  std::uint64_t bits = 0;   // stored edge bits walked
};

/// Learned approximator over one input: a PATRICIA tree whose edges carry a
/// folded coefficient for a whole single-child chain of bases and whose branch
/// points carry the coefficient of the basis where two keys diverge.
///
/// For a chain node covering depths [start, end) with folded value W, the
/// uncompressed coefficient of the basis at depth d is r_d * W, where r_d is
/// the Haar-sign value (+-A(d)) of the chain direction at d. A loosened update
/// adds the same increment to W for every basis of the chain, so the folding
/// stays exact. Unvisited bases hold no storage and read as zero.
class PatriciaTree {
 public:
  PatriciaTree(BasisProfile profile, int out_dim);

  const BasisProfile& profile() const { return profile_; }
  int precision() const { return precision_; }
  int out_dim() const { return out_dim_; }

  PredictResult predict(const UnitCode& code) const;
  /// Writes y and dy/du into caller buffers of length out_dim.
  void predict_into(const UnitCode& code, std::span<double> y, std::span<double> dy_du,
                    PathCost* cost = nullptr) const;

  /// Loosened update: every basis on the key's path receives
  /// rate * gain * delta_j * (Haar-sign value at u); the bias receives rate * gain * delta_j.
  /// Non-finite delta raises Error(kNumeric, "divergent update") and leaves the tree unchanged.
  void update(const UnitCode& code, std::span<const double> delta, double rate, PathCost* cost = nullptr);

  std::span<const double> bias() const { return bias_; }
  void set_bias(std::span<const double> bias);

  /// Number of tree nodes, not counting the root bias.
  std::size_t node_count() const { return nodes_.size(); }
  /// Largest number of nodes on a root-to-leaf path.
  int max_depth() const;
  /// Count of nodes at each tree level (level 0 = the top node).
  std::vector<std::size_t> level_histogram() const;
  std::size_t memory_bytes() const;

  /// Structural check: no single-child nodes, contiguous depth ranges, leaves end at the precision.
  bool check_invariants(std::string* why = nullptr) const;

  std::vector<std::uint8_t> serialize() const;
  static PatriciaTree deserialize(std::span<const std::uint8_t> bytes);

  void write(ByteWriter& out) const;
  static PatriciaTree read(ByteReader& in);

 private:
  static constexpr std::int32_t kNone = -1;

  struct Node {
    std::uint64_t key = 0;  // left-aligned key bits; meaningful on [0, end)
    std::uint8_t start = 0;
    std::uint8_t end = 0;
    std::int32_t child[2] = {kNone, kNone};
  };

  // Coefficient block of node i: [chain W | branch w], out_dim each.
  double* chain_coeff(std::int32_t i) { return coeffs_.data() + static_cast<std::size_t>(i) * 2 * out_dim_; }
  const double* chain_coeff(std::int32_t i) const {
    return coeffs_.data() + static_cast<std::size_t>(i) * 2 * out_dim_;
  }
  double* branch_coeff(std::int32_t i) { return chain_coeff(i) + out_dim_; }
  const double* branch_coeff(std::int32_t i) const { return chain_coeff(i) + out_dim_; }

  std::int32_t new_node(std::uint64_t key, int start, int end);
  std::uint64_t left_align(const UnitCode& code) const;
  void check_code(const UnitCode& code) const;

  void write_node(ByteWriter& out, std::int32_t i) const;
  std::int32_t read_node(ByteReader& in, std::uint64_t prefix, int start);

  BasisProfile profile_;
  int precision_ = 0;
  int out_dim_ = 1;
  std::vector<double> bias_;
  std::vector<Node> nodes_;
  std::vector<double> coeffs_;
  std::int32_t root_ = kNone;
};

namespace serial {
void write_profile(ByteWriter& out, const BasisProfile& profile);
BasisProfile read_profile(ByteReader& in);
}  // namespace serial

}  // namespace shkan
