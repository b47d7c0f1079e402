// SPDX-License-Identifier: Apache-2.0
#include "mcdn/diagnostics.hpp"

#include <chrono>
#include <cmath>

#include "mcdn/gradcheck.hpp"
#include "mcdn/model.hpp"
#include "mcdn/synthetic.hpp"

namespace mcdn {

Config reduced_config() {
  Config c;
  c.model.d = 16;
  c.model.n_blocks = 2;
  c.model.heads = 2;
  c.model.k = 12;
  c.model.windows = {2, 3, 4};
  c.model.dg = 8;
  c.model.max_len = 16;
  return c;
}

GradcheckReport check_model_gradients(const Config &config, std::uint64_t seed, double eps) {
  const auto start = std::chrono::steady_clock::now();
  const auto data = make_marker_dataset(4, seed);
  Model model(config, build_vocab(data, nullptr), seed);
  const auto batch = model.encode(data);
  const std::uint64_t mask_seed = seed ^ 0x5eedULL;

  auto evaluate = [&] {
    Rng rng(mask_seed);
    return model.objective(batch, {config.model.dropout, &rng, true}).total;
  };

  model.params().zero_grad();
  evaluate().backward();

  GradcheckReport report;
  for (auto &p : model.params().entries()) {
    if (!p.trainable)
      continue;
    std::vector<double> analytic(p.value.grad().begin(), p.value.grad().end());
    auto numeric_t = finite_diff_inplace([&] { return evaluate().item(); }, p.value, eps);
    std::vector<double> numeric(numeric_t.data().begin(), numeric_t.data().end());
    if (!p.frozen_rows.empty()) {
      const std::size_t cols = p.value.cols();
      for (std::size_t r = 0; r < p.frozen_rows.size(); ++r)
        if (p.frozen_rows[r])
          for (std::size_t c = 0; c < cols; ++c)
            analytic[r * cols + c] = numeric[r * cols + c] = 0.0;
    }
    ParamGradError e;
    e.name = p.name;
    e.size = analytic.size();
    e.relative = relative_error(analytic, numeric);
    e.max_element = max_elementwise_relative_error(analytic, numeric, 1e-6);
    double sq = 0.0;
    for (double g : analytic)
      sq += g * g;
    e.grad_norm = std::sqrt(sq);
    report.worst = std::max(report.worst, e.relative);
    report.params.push_back(e);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

} // namespace mcdn
