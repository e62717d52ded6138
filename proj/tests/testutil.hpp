#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gencnn/model.hpp"
#include "gencnn/rng.hpp"
#include "gencnn/training.hpp"

namespace testutil {

using gencnn::ModelConfig;
using gencnn::Param;
using gencnn::ParameterSet;
using gencnn::Rng;
using gencnn::Tape;
using gencnn::Tensor;
using gencnn::Var;

// ---------------------------------------------------------------------------
// finite differences

struct FdResult {
  double max_rel_error = 0.0;
  std::string worst;  // tensor name and coordinate of the worst mismatch
};

/// Central finite differences over every coordinate of every listed parameter
/// against the analytic gradients. The denominator is floored so coordinates
/// whose true gradient sits below `rel_floor` are judged absolutely at
/// tol*rel_floor, where central-difference cancellation noise would otherwise
/// dominate a pure ratio.
inline FdResult fd_check(std::vector<Param*> params,
                         const std::function<double()>& loss_value,
                         const gencnn::GradientMap& analytic, double h = 1e-5,
                         double rel_floor = 1e-3) {
  FdResult res;
  for (Param* p : params) {
    for (int64_t i = 0; i < p->value.size(); ++i) {
      double saved = p->value[i];
      p->value[i] = saved + h;
      double up = loss_value();
      p->value[i] = saved - h;
      double down = loss_value();
      p->value[i] = saved;
      double fd = (up - down) / (2.0 * h);
      double an = analytic.has(p->leaf_id) ? analytic.at(p->leaf_id)[i] : 0.0;
      double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), rel_floor});
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = p->name + "[" + std::to_string(i) + "] analytic=" + std::to_string(an) +
                    " fd=" + std::to_string(fd);
      }
    }
  }
  return res;
}

inline void randomize(ParameterSet& ps, Rng& rng, double range) {
  for (Param* p : ps.params()) {
    for (int64_t i = 0; i < p->value.size(); ++i) p->value[i] = rng.uniform(-range, range);
  }
}

// ---------------------------------------------------------------------------
// configs

/// The small configuration used for end-to-end gradient checks.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.l_alpha = 6;
  c.l_beta = 4;
  c.embed_dim = 2;
  c.window = 2;
  c.tf_maps = {1, 1};
  c.ta_maps = {1, 1};
  c.fc_dim = 3;
  c.cluster_count = 2;
  return c;
}

// ---------------------------------------------------------------------------
// files

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("gencnn_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

 private:
  std::filesystem::path dir_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------
// synthetic corpora (one sentence per line, space separated)

/// 50 sentences with unique first tokens followed by `body` shared-vocabulary
/// words; small enough to memorize, long enough that the unavoidable log(50)
/// first-token cost is amortized.
inline std::string memorization_corpus(int sentences = 50, int body = 12, uint64_t seed = 11) {
  Rng rng(seed);
  std::ostringstream os;
  for (int s = 0; s < sentences; ++s) {
    os << "s" << s;
    for (int t = 0; t < body; ++t) os << " w" << rng.below(100);
    os << "\n";
  }
  return os.str();
}

}  // namespace testutil
