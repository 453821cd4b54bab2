#include "shkan/shkan.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <string>

#include "shkan/codec.hpp"
#include "shkan/error.hpp"
#include "shkan/experiments.hpp"
#include "shkan/network.hpp"
#include "shkan/patricia_tree.hpp"

struct shkan_tree {
  shkan::CodecConfig codec;
  shkan::PatriciaTree tree;
};

struct shkan_network {
  shkan::Network net;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
int guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SHKAN_OK;
  } catch (const shkan::Error& e) {
    g_last_error = e.what();
    return static_cast<int>(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SHKAN_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SHKAN_E_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) shkan::fail(shkan::ErrorKind::kInvalidArgument, what);
}

shkan::CodecConfig make_codec(shkan_codec codec, int bits) {
  shkan::CodecConfig cfg = codec == SHKAN_CODEC_FIXED ? shkan::CodecConfig::fixed(bits)
                                                      : shkan::CodecConfig::float754(bits);
  if (codec != SHKAN_CODEC_FIXED && codec != SHKAN_CODEC_FLOAT754)
    shkan::fail(shkan::ErrorKind::kInvalidArgument, "unknown codec");
  cfg.validate();
  return cfg;
}

std::vector<std::uint8_t> read_all(const char* path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) shkan::fail(shkan::ErrorKind::kIo, std::string("cannot open ") + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const char* path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) shkan::fail(shkan::ErrorKind::kIo, std::string("cannot write ") + path);
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* shkan_version(void) { return "0.1.0"; }
const char* shkan_last_error(void) { return g_last_error.c_str(); }
void shkan_free_string(char* s) { std::free(s); }

int shkan_tree_create(shkan_codec codec, int bits, int out_dim, shkan_tree** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    require(out_dim >= 1, "out_dim must be >= 1");
    const auto cfg = make_codec(codec, bits);
    *out = new shkan_tree{cfg, shkan::PatriciaTree(shkan::default_profile(cfg), out_dim)};
  });
}

void shkan_tree_destroy(shkan_tree* tree) { delete tree; }

int shkan_tree_predict(const shkan_tree* tree, double x, double* y, double* dy_dx) {
  return guarded([&] {
    require(tree != nullptr && y != nullptr, "null argument");
    const auto code = shkan::encode_lenient(x, tree->codec);
    const auto r = tree->tree.predict(code);
    std::memcpy(y, r.y.data(), r.y.size() * sizeof(double));
    if (dy_dx != nullptr) {
      const double dg = std::isfinite(x) ? shkan::encode_derivative(x, tree->codec) : 0.0;
      for (std::size_t j = 0; j < r.dy_du.size(); ++j) dy_dx[j] = r.dy_du[j] * dg;
    }
  });
}

int shkan_tree_update(shkan_tree* tree, double x, const double* delta, double rate) {
  return guarded([&] {
    require(tree != nullptr && delta != nullptr, "null argument");
    tree->tree.update(shkan::encode(x, tree->codec),
                      std::span<const double>(delta, static_cast<std::size_t>(tree->tree.out_dim())), rate);
  });
}

int shkan_tree_node_count(const shkan_tree* tree, size_t* out) {
  return guarded([&] {
    require(tree != nullptr && out != nullptr, "null argument");
    *out = tree->tree.node_count();
  });
}

int shkan_tree_save(const shkan_tree* tree, const char* path) {
  return guarded([&] {
    require(tree != nullptr && path != nullptr, "null argument");
    write_all(path, tree->tree.serialize());
  });
}

int shkan_tree_load(const char* path, shkan_tree** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto tree = shkan::PatriciaTree::deserialize(read_all(path));
    // The codec is recovered from the profile depth: fixed keys use a single Slash region.
    const auto& regions = tree.profile().regions();
    shkan::CodecConfig cfg = regions.size() == 1 ? shkan::CodecConfig::fixed(tree.precision())
                                                 : shkan::CodecConfig::float754(tree.precision() - 12);
    cfg.validate();
    *out = new shkan_tree{cfg, std::move(tree)};
  });
}

int shkan_network_create(const int* widths, size_t count, shkan_residual residual, shkan_codec codec, int bits,
                         shkan_network** out) {
  return guarded([&] {
    require(widths != nullptr && out != nullptr, "null argument");
    require(residual == SHKAN_RESIDUAL_NONE || residual == SHKAN_RESIDUAL_IDENTITY, "unknown residual mode");
    const auto spec = shkan::NetworkSpec::uniform(std::vector<int>(widths, widths + count),
                                                  static_cast<shkan::ResidualMode>(residual), make_codec(codec, bits));
    *out = new shkan_network{shkan::Network(spec)};
  });
}

void shkan_network_destroy(shkan_network* net) { delete net; }

int shkan_network_predict(const shkan_network* net, const double* x, double* y) {
  return guarded([&] {
    require(net != nullptr && x != nullptr && y != nullptr, "null argument");
    const auto out = net->net.predict(std::span<const double>(x, static_cast<std::size_t>(net->net.input_dim())));
    std::memcpy(y, out.data(), out.size() * sizeof(double));
  });
}

int shkan_network_train_step(shkan_network* net, const double* x, const double* target, double alpha, int* skipped) {
  return guarded([&] {
    require(net != nullptr && x != nullptr && target != nullptr, "null argument");
    const auto r = net->net.train_step(std::span<const double>(x, static_cast<std::size_t>(net->net.input_dim())),
                                       std::span<const double>(target, static_cast<std::size_t>(net->net.output_dim())),
                                       alpha, shkan::StepRule::kNormalized);
    if (skipped != nullptr) *skipped = r.outcome == shkan::StepOutcome::kSkipped ? 1 : 0;
  });
}

int shkan_network_derivative(const shkan_network* net, const double* x, int input_index, double* dy) {
  return guarded([&] {
    require(net != nullptr && x != nullptr && dy != nullptr, "null argument");
    const auto d = net->net.model_derivative(
        std::span<const double>(x, static_cast<std::size_t>(net->net.input_dim())), input_index);
    std::memcpy(dy, d.data(), d.size() * sizeof(double));
  });
}

int shkan_network_node_count(const shkan_network* net, size_t* out) {
  return guarded([&] {
    require(net != nullptr && out != nullptr, "null argument");
    *out = net->net.node_count();
  });
}

int shkan_network_save(const shkan_network* net, const char* path) {
  return guarded([&] {
    require(net != nullptr && path != nullptr, "null argument");
    write_all(path, net->net.serialize());
  });
}

int shkan_network_load(const char* path, shkan_network** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new shkan_network{shkan::Network::deserialize(read_all(path))};
  });
}

int shkan_run_experiment(const char* kind, const char* config_json, const char* output_dir, const char* base_dir,
                         char** summary) {
  return guarded([&] {
    require(kind != nullptr && output_dir != nullptr, "null argument");
    const std::string text = shkan::run_experiment(kind, config_json == nullptr ? "" : config_json, output_dir,
                                                   base_dir == nullptr ? "" : base_dir);
    if (summary != nullptr) *summary = copy_string(text);
  });
}

int shkan_inspect(const char* path, char** report) {
  return guarded([&] {
    require(path != nullptr && report != nullptr, "null argument");
    *report = copy_string(shkan::inspect_model(path));
  });
}

}  // extern "C"
