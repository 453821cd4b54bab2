#include "shkan/patricia_tree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "shkan/error.hpp"

namespace shkan {
namespace {

constexpr std::uint32_t kTreeVersion = 1;

inline unsigned bit_at(std::uint64_t key, int depth) { return static_cast<unsigned>((key >> (63 - depth)) & 1U); }

inline std::uint64_t high_mask(int n) { return n == 0 ? 0 : ~std::uint64_t{0} << (64 - n); }

// First depth in [0, end) where the two left-aligned keys differ, or end.
inline int divergence(std::uint64_t a, std::uint64_t b, int end) {
  const std::uint64_t diff = (a ^ b) & high_mask(end);
  return diff == 0 ? end : std::countl_zero(diff);
}

inline void axpy(double a, const double* x, std::span<double> y) {
  for (std::size_t j = 0; j < y.size(); ++j) y[j] += a * x[j];
}

}  // namespace

namespace serial {

void write_profile(ByteWriter& out, const BasisProfile& profile) {
  out.put_u32(static_cast<std::uint32_t>(profile.regions().size()));
  for (const auto& region : profile.regions()) {
    out.put_u8(static_cast<std::uint8_t>(region.kind));
    out.put_u32(static_cast<std::uint32_t>(region.depths));
    out.put_f64(region.beta);
  }
  out.put_u8(static_cast<std::uint8_t>(profile.convention()));
  out.put_u8(static_cast<std::uint8_t>(profile.normalization()));
}

BasisProfile read_profile(ByteReader& in) {
  const std::uint32_t count = in.get_u32();
  if (count == 0 || count > 64) fail(ErrorKind::kData, "corrupt profile header");
  std::vector<ProfileRegion> regions;
  for (std::uint32_t r = 0; r < count; ++r) {
    ProfileRegion region;
    const std::uint8_t kind = in.get_u8();
    if (kind > static_cast<std::uint8_t>(BasisKind::kConstant)) fail(ErrorKind::kData, "corrupt profile kind");
    region.kind = static_cast<BasisKind>(kind);
    const std::uint32_t depths = in.get_u32();
    if (depths == 0 || depths > 64) fail(ErrorKind::kData, "corrupt profile depth");
    region.depths = static_cast<int>(depths);
    region.beta = in.get_f64();
    regions.push_back(region);
  }
  const std::uint8_t convention = in.get_u8();
  const std::uint8_t normalization = in.get_u8();
  if (convention > 1 || normalization > 1) fail(ErrorKind::kData, "corrupt profile flags");
  try {
    return BasisProfile(std::move(regions), static_cast<AmplitudeConvention>(convention),
                        static_cast<StepNormalization>(normalization));
  } catch (const Error& e) {
    fail(ErrorKind::kData, std::string("corrupt profile: ") + e.what());
  }
}

}  // namespace serial

PatriciaTree::PatriciaTree(BasisProfile profile, int out_dim)
    : profile_(std::move(profile)), precision_(profile_.depth_count()), out_dim_(out_dim) {
  if (out_dim_ < 1) fail(ErrorKind::kInvalidArgument, "tree output dimension must be positive");
  if (precision_ < 1) fail(ErrorKind::kInvalidArgument, "tree needs a non-empty basis profile");
  bias_.assign(static_cast<std::size_t>(out_dim_), 0.0);
}

void PatriciaTree::set_bias(std::span<const double> bias) {
  if (bias.size() != bias_.size()) fail(ErrorKind::kInvalidArgument, "bias length differs from output dimension");
  std::copy(bias.begin(), bias.end(), bias_.begin());
}

void PatriciaTree::check_code(const UnitCode& code) const {
  if (code.precision != precision_) fail(ErrorKind::kInvalidArgument, "precision mismatch");
}

std::uint64_t PatriciaTree::left_align(const UnitCode& code) const {
  return precision_ == 64 ? code.bits : code.bits << (64 - precision_);
}

std::int32_t PatriciaTree::new_node(std::uint64_t key, int start, int end) {
  Node node;
  node.key = key & high_mask(end);
  node.start = static_cast<std::uint8_t>(start);
  node.end = static_cast<std::uint8_t>(end);
  nodes_.push_back(node);
  coeffs_.resize(coeffs_.size() + 2 * static_cast<std::size_t>(out_dim_), 0.0);
  return static_cast<std::int32_t>(nodes_.size() - 1);
}

PredictResult PatriciaTree::predict(const UnitCode& code) const {
  PredictResult result;
  result.y.resize(static_cast<std::size_t>(out_dim_));
  result.dy_du.resize(static_cast<std::size_t>(out_dim_));
  predict_into(code, result.y, result.dy_du);
  return result;
}

void PatriciaTree::predict_into(const UnitCode& code, std::span<double> y, std::span<double> dy_du,
                                PathCost* cost) const {
  check_code(code);
  if (y.size() != bias_.size() || dy_du.size() != bias_.size())
    fail(ErrorKind::kInvalidArgument, "output buffer length differs from output dimension");
  std::copy(bias_.begin(), bias_.end(), y.begin());
  std::fill(dy_du.begin(), dy_du.end(), 0.0);
  if (root_ == kNone) return;

  using basis_detail::forward_slope;
  using basis_detail::forward_value;
  using basis_detail::update_value;

  const std::uint64_t key = left_align(code);
  double t = code.u;  // position inside the support of the current depth
  auto advance = [&t] {
    t += t;
    if (t >= 1.0) t -= 1.0;
  };

  int d = 0;
  std::int32_t i = root_;
  while (true) {
    const Node& node = nodes_[static_cast<std::size_t>(i)];
    const int stop = divergence(key, node.key, node.end);
    if (cost) {
      ++cost->nodes;
      cost->bits += static_cast<std::uint64_t>(stop - node.start);
    }
    double acc = 0.0;
    double dacc = 0.0;
    for (; d < stop; ++d) {
      const BasisKind kind = profile_.kind_at(d);
      const double amp = profile_.amplitude_at(d);
      const double r = update_value(kind, amp, bit_at(key, d));
      acc += r * forward_value(kind, amp, t);
      dacc += r * forward_slope(kind, amp, d);
      advance();
    }
    if (stop < node.end) {
      // The key leaves the stored chain here; the basis at `stop` was visited
      // along the stored direction and everything below it was not.
      const BasisKind kind = profile_.kind_at(stop);
      const double amp = profile_.amplitude_at(stop);
      const double r = update_value(kind, amp, bit_at(node.key, stop));
      acc += r * forward_value(kind, amp, t);
      dacc += r * forward_slope(kind, amp, stop);
      axpy(acc, chain_coeff(i), y);
      axpy(dacc, chain_coeff(i), dy_du);
      return;
    }
    if (node.end > node.start) {
      axpy(acc, chain_coeff(i), y);
      axpy(dacc, chain_coeff(i), dy_du);
    }
    if (node.end == precision_) return;

    const BasisKind kind = profile_.kind_at(d);
    const double amp = profile_.amplitude_at(d);
    axpy(forward_value(kind, amp, t), branch_coeff(i), y);
    axpy(forward_slope(kind, amp, d), branch_coeff(i), dy_du);
    const unsigned bit = bit_at(key, d);
    advance();
    ++d;
    i = node.child[bit];
  }
}

void PatriciaTree::update(const UnitCode& code, std::span<const double> delta, double rate, PathCost* cost) {
  check_code(code);
  if (delta.size() != bias_.size()) fail(ErrorKind::kInvalidArgument, "delta length differs from output dimension");
  if (!(rate > 0.0) || !std::isfinite(rate)) fail(ErrorKind::kInvalidArgument, "learning rate must be positive");
  for (double v : delta)
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "divergent update");
  if (std::all_of(delta.begin(), delta.end(), [](double v) { return v == 0.0; })) return;

  const double gain = rate * profile_.update_gain();
  const auto n = static_cast<std::size_t>(out_dim_);
  for (std::size_t j = 0; j < n; ++j) bias_[j] += gain * delta[j];

  const std::uint64_t key = left_align(code);
  if (root_ == kNone) {
    root_ = new_node(key, 0, precision_);
    double* w = chain_coeff(root_);
    for (std::size_t j = 0; j < n; ++j) w[j] = gain * delta[j];
    if (cost) ++cost->nodes;
    return;
  }

  std::int32_t i = root_;
  while (true) {
    const Node node = nodes_[static_cast<std::size_t>(i)];
    const int stop = divergence(key, node.key, node.end);
    if (cost) {
      ++cost->nodes;
      cost->bits += static_cast<std::uint64_t>(stop - node.start);
    }

    if (stop < node.end) {
      // Split the chain at `stop`: the upper part keeps W, the basis at `stop`
      // becomes an explicit branch, the rest of the old chain moves down.
      const std::int32_t lower = new_node(node.key, stop + 1, node.end);
      const std::int32_t leaf = new_node(key, stop + 1, precision_);
      Node& low = nodes_[static_cast<std::size_t>(lower)];
      low.child[0] = node.child[0];
      low.child[1] = node.child[1];
      std::copy(chain_coeff(i), chain_coeff(i) + 2 * n, chain_coeff(lower));
      if (stop + 1 == node.end) std::fill(chain_coeff(lower), chain_coeff(lower) + n, 0.0);

      const BasisKind kind = profile_.kind_at(stop);
      const double amp = profile_.amplitude_at(stop);
      const unsigned old_bit = bit_at(node.key, stop);
      const unsigned new_bit = old_bit ^ 1U;
      double* w_chain = chain_coeff(i);
      double* w_branch = branch_coeff(i);
      const double r_old = basis_detail::update_value(kind, amp, old_bit);
      const double r_new = basis_detail::update_value(kind, amp, new_bit);
      for (std::size_t j = 0; j < n; ++j) w_branch[j] = r_old * w_chain[j] + gain * delta[j] * r_new;
      if (stop > node.start) {
        for (std::size_t j = 0; j < n; ++j) w_chain[j] += gain * delta[j];
      } else {
        std::fill(w_chain, w_chain + n, 0.0);
      }
      double* w_leaf = chain_coeff(leaf);
      if (stop + 1 < precision_)
        for (std::size_t j = 0; j < n; ++j) w_leaf[j] = gain * delta[j];

      Node& top = nodes_[static_cast<std::size_t>(i)];
      top.end = static_cast<std::uint8_t>(stop);
      top.key &= high_mask(stop);
      top.child[old_bit] = lower;
      top.child[new_bit] = leaf;
      return;
    }

    if (node.end > node.start) {
      double* w_chain = chain_coeff(i);
      for (std::size_t j = 0; j < n; ++j) w_chain[j] += gain * delta[j];
    }
    if (node.end == precision_) return;

    const int d = node.end;
    const unsigned bit = bit_at(key, d);
    const double r = basis_detail::update_value(profile_.kind_at(d), profile_.amplitude_at(d), bit);
    double* w_branch = branch_coeff(i);
    for (std::size_t j = 0; j < n; ++j) w_branch[j] += gain * delta[j] * r;
    i = node.child[bit];
  }
}

int PatriciaTree::max_depth() const {
  const auto hist = level_histogram();
  return static_cast<int>(hist.size());
}

std::vector<std::size_t> PatriciaTree::level_histogram() const {
  std::vector<std::size_t> hist;
  if (root_ == kNone) return hist;
  std::vector<std::pair<std::int32_t, std::size_t>> stack{{root_, 0}};
  while (!stack.empty()) {
    auto [i, level] = stack.back();
    stack.pop_back();
    if (hist.size() <= level) hist.resize(level + 1, 0);
    ++hist[level];
    for (std::int32_t c : nodes_[static_cast<std::size_t>(i)].child)
      if (c != kNone) stack.emplace_back(c, level + 1);
  }
  return hist;
}

std::size_t PatriciaTree::memory_bytes() const {
  return sizeof(*this) + nodes_.capacity() * sizeof(Node) + coeffs_.capacity() * sizeof(double) +
         bias_.capacity() * sizeof(double);
}

bool PatriciaTree::check_invariants(std::string* why) const {
  auto bad = [why](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (root_ == kNone) return nodes_.empty() ? true : bad("nodes present without a root");
  std::size_t seen = 0;
  std::vector<std::int32_t> stack{root_};
  if (nodes_[static_cast<std::size_t>(root_)].start != 0) return bad("root does not start at depth 0");
  while (!stack.empty()) {
    const std::int32_t i = stack.back();
    stack.pop_back();
    if (++seen > nodes_.size()) return bad("cycle detected");
    const Node& node = nodes_[static_cast<std::size_t>(i)];
    if (node.start > node.end || node.end > precision_) return bad("bad depth range");
    const bool has0 = node.child[0] != kNone;
    const bool has1 = node.child[1] != kNone;
    if (has0 != has1) return bad("single-child node");
    if (node.end == precision_) {
      if (has0) return bad("node at full precision has children");
      continue;
    }
    if (!has0) return bad("chain ends above full precision without a branch");
    for (unsigned c = 0; c < 2; ++c) {
      const Node& kid = nodes_[static_cast<std::size_t>(node.child[c])];
      if (kid.start != node.end + 1) return bad("child does not start below the branch");
      if (((kid.key ^ node.key) & high_mask(node.end)) != 0) return bad("child key prefix differs from parent");
      if (bit_at(kid.key, node.end) != c) return bad("child sits on the wrong side of the branch");
      stack.push_back(node.child[c]);
    }
  }
  if (seen != nodes_.size()) return bad("unreachable nodes");
  return true;
}

void PatriciaTree::write(ByteWriter& out) const {
  out.put_tag("SHPT");
  out.put_u32(kTreeVersion);
  serial::write_profile(out, profile_);
  out.put_u32(static_cast<std::uint32_t>(precision_));
  out.put_u32(static_cast<std::uint32_t>(out_dim_));
  for (double b : bias_) out.put_f64(b);
  out.put_u8(root_ == kNone ? 0 : 1);
  if (root_ != kNone) write_node(out, root_);
}

void PatriciaTree::write_node(ByteWriter& out, std::int32_t i) const {
  const Node& node = nodes_[static_cast<std::size_t>(i)];
  const int len = node.end - node.start;
  const std::uint64_t edge = len == 0 ? 0 : (node.key << node.start) >> (64 - len);
  out.put_u8(static_cast<std::uint8_t>(len));
  out.put_u64(edge);
  for (int j = 0; j < out_dim_; ++j) out.put_f64(chain_coeff(i)[j]);
  const bool branch = node.child[0] != kNone;
  out.put_u8(branch ? 3 : 0);
  if (!branch) return;
  for (int j = 0; j < out_dim_; ++j) out.put_f64(branch_coeff(i)[j]);
  write_node(out, node.child[0]);
  write_node(out, node.child[1]);
}

PatriciaTree PatriciaTree::read(ByteReader& in) {
  if (!in.tag_is("SHPT")) fail(ErrorKind::kData, "not a tree model (bad magic)");
  const std::uint32_t version = in.get_u32();
  if (version != kTreeVersion) fail(ErrorKind::kData, "unsupported tree model version " + std::to_string(version));
  BasisProfile profile = serial::read_profile(in);
  const std::uint32_t precision = in.get_u32();
  const std::uint32_t out_dim = in.get_u32();
  if (static_cast<int>(precision) != profile.depth_count()) fail(ErrorKind::kData, "precision differs from profile");
  if (out_dim == 0 || out_dim > (1U << 20)) fail(ErrorKind::kData, "corrupt output dimension");
  PatriciaTree tree(std::move(profile), static_cast<int>(out_dim));
  for (auto& b : tree.bias_) b = in.get_f64();
  const std::uint8_t has_root = in.get_u8();
  if (has_root > 1) fail(ErrorKind::kData, "corrupt root flag");
  if (has_root) tree.root_ = tree.read_node(in, 0, 0);
  std::string why;
  if (!tree.check_invariants(&why)) fail(ErrorKind::kData, "corrupt tree structure: " + why);
  return tree;
}

std::int32_t PatriciaTree::read_node(ByteReader& in, std::uint64_t prefix, int start) {
  const int len = in.get_u8();
  const std::uint64_t edge = in.get_u64();
  const int end = start + len;
  if (end > precision_) fail(ErrorKind::kData, "corrupt edge length");
  if (len < 64 && (edge >> len) != 0) fail(ErrorKind::kData, "corrupt edge bits");
  const std::uint64_t key = len == 0 ? prefix : prefix | (edge << (64 - end));
  const std::int32_t i = new_node(key, start, end);
  for (int j = 0; j < out_dim_; ++j) chain_coeff(i)[j] = in.get_f64();
  const std::uint8_t flags = in.get_u8();
  if (flags == 0) {
    if (end != precision_) fail(ErrorKind::kData, "leaf above full precision");
    return i;
  }
  if (flags != 3 || end == precision_) fail(ErrorKind::kData, "corrupt child flags");
  for (int j = 0; j < out_dim_; ++j) branch_coeff(i)[j] = in.get_f64();
  const std::int32_t c0 = read_node(in, key, end + 1);
  const std::int32_t c1 = read_node(in, key | (std::uint64_t{1} << (63 - end)), end + 1);
  nodes_[static_cast<std::size_t>(i)].child[0] = c0;
  nodes_[static_cast<std::size_t>(i)].child[1] = c1;
  return i;
}

std::vector<std::uint8_t> PatriciaTree::serialize() const {
  ByteWriter out;
  write(out);
  const std::uint64_t sum = fnv1a64(out.bytes());
  out.put_u64(sum);
  return out.take();
}

PatriciaTree PatriciaTree::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) fail(ErrorKind::kData, "truncated model data");
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.last(8));
  if (tail.get_u64() != fnv1a64(body)) {
    // Distinguish a short file from a flipped byte when the header still parses.
    fail(ErrorKind::kData, "model checksum mismatch (corrupt or truncated file)");
  }
  ByteReader in(body);
  PatriciaTree tree = read(in);
  if (in.remaining() != 0) fail(ErrorKind::kData, "trailing bytes after tree model");
  return tree;
}

}  // namespace shkan
