// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "smru/complexity.hpp"

using namespace smru;

namespace {
double total_no_postnet(int embedding) {
  ModelConfig cfg;
  cfg.embedding = embedding;
  cfg.postnet.enabled = false;
  return count_macs(cfg).total_macs_per_s;
}

double module_cost(const ComplexityReport& rep, const std::string& name) {
  for (const auto& m : rep.modules)
    if (m.name == name) return m.macs_per_s;
  return 0.0;
}
}  // namespace

TEST_CASE("published complexity budgets per preset") {
  CHECK(total_no_postnet(10) >= 40e6);
  CHECK(total_no_postnet(10) <= 60e6);
  CHECK(total_no_postnet(200) >= 5.5e9);
  CHECK(total_no_postnet(200) <= 8.0e9);

  ModelConfig cfg = make_preset("T");
  const double pn = module_cost(count_macs(cfg), "postnet");
  CHECK(pn >= 20e6);
  CHECK(pn <= 40e6);

  // committed S and L presets land near their published budgets
  CHECK(std::abs(total_no_postnet(17) - 0.11e9) / 0.11e9 < 0.15);
  CHECK(std::abs(total_no_postnet(68) - 1.03e9) / 1.03e9 < 0.05);
}

TEST_CASE("bisection recovers the committed preset embeddings") {
  ModelConfig base;
  base.postnet.enabled = false;
  CHECK(bisect_embedding(0.11e9, base) == 17);
  CHECK(bisect_embedding(1.03e9, base) == 68);
}

TEST_CASE("count is strictly increasing in the embedding width") {
  double prev = 0.0;
  for (int e : {5, 10, 17, 40, 68, 120, 200}) {
    const double v = total_no_postnet(e);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("raising any lambda pair strictly lowers the count") {
  ModelConfig base;
  base.postnet.enabled = false;
  const double ref = count_macs(base).total_macs_per_s;
  for (int j = 0; j < base.num_blocks() / 2; ++j) {
    ModelConfig mod = base;
    mod.lambda_schedule[j] *= 2;
    mod.lambda_schedule[mod.num_blocks() - 1 - j] *= 2;
    // keep the encoder half non-decreasing, otherwise skip
    bool valid = true;
    for (int i = 1; i < mod.num_blocks() / 2; ++i)
      if (mod.lambda_schedule[i] < mod.lambda_schedule[i - 1]) valid = false;
    if (!valid) continue;
    CHECK(count_macs(mod).total_macs_per_s < ref);
  }
}

TEST_CASE("doubling every lambda cuts UNet cost by more than 40 percent") {
  ModelConfig base;
  base.postnet.enabled = false;
  ModelConfig doubled = base;
  for (auto& l : doubled.lambda_schedule) l *= 2;
  const double before = module_cost(count_macs(base), "unet");
  const double after = module_cost(count_macs(doubled), "unet");
  CHECK(after < 0.6 * before);
}

TEST_CASE("report bookkeeping: totals are sums, per-frame scales by the rate") {
  const ModelConfig cfg = make_preset("S");
  const ComplexityReport rep = count_macs(cfg);
  double sum = 0.0;
  uint64_t params = 0;
  for (const auto& m : rep.modules) {
    sum += m.macs_per_s;
    params += m.params;
  }
  CHECK(rep.total_macs_per_s == doctest::Approx(sum).epsilon(1e-12));
  CHECK(rep.params == params);
  CHECK(rep.macs_per_frame == doctest::Approx(rep.total_macs_per_s / 100.0).epsilon(1e-12));
  CHECK(rep.params == parameter_count(cfg));
}
