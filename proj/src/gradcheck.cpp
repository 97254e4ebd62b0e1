#include "polytuplet/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "polytuplet/encoder.hpp"
#include "polytuplet/error.hpp"
#include "polytuplet/loss.hpp"
#include "polytuplet/rng.hpp"

namespace polytuplet {

namespace {

constexpr double kKinkGuard = 1e-4;

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0;
  double scale_a = 0.0;
  double scale_n = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
    scale_a += analytic[k] * analytic[k];
    scale_n += numeric[k] * numeric[k];
  }
  const double denom = std::sqrt(scale_a) + std::sqrt(scale_n);
  return denom < 1e-12 ? 0.0 : std::sqrt(diff) / denom;
}

std::vector<double> random_unit(Rng& rng, std::size_t d) {
  std::vector<double> x(d);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return project_to_sphere(x);
}

EmbeddingBatch random_batch(Rng& rng, std::size_t b, std::size_t n, std::size_t d) {
  EmbeddingBatch batch;
  batch.n_answers = n;
  batch.context = Matrix(b, d);
  batch.results = Matrix(b * n, d);
  for (std::size_t i = 0; i < b; ++i) {
    const auto a = random_unit(rng, d);
    std::copy(a.begin(), a.end(), batch.context.row(i).begin());
    for (std::size_t j = 0; j < n; ++j) {
      const auto r = random_unit(rng, d);
      std::copy(r.begin(), r.end(), batch.result(i, j).begin());
    }
    batch.labels.push_back(rng.below(n));
  }
  return batch;
}

// True when some hinge argument or some mining boundary is too close to a kink.
bool near_kink(const EmbeddingBatch& batch, double margin) {
  const Matrix dist = distance_matrix(batch);
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    const std::size_t y = batch.labels[i];
    for (std::size_t j = 0; j < batch.n_answers; ++j) {
      if (j == y) continue;
      const double gap = dist(i, y) - dist(i, j);
      if (std::abs(gap) < kKinkGuard || std::abs(gap + margin) < kKinkGuard) return true;
    }
  }
  return false;
}

// Central differences of f over every coordinate of `values`.
std::vector<double> numeric_grad(std::span<double> values, double step,
                                 const std::function<double()>& f) {
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) {
    const double saved = values[k];
    values[k] = saved + step;
    const double up = f();
    values[k] = saved - step;
    const double down = f();
    values[k] = saved;
    out[k] = (up - down) / (2.0 * step);
  }
  return out;
}

std::vector<double> concat(const Matrix& a, const Matrix& b) {
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  return out;
}

std::size_t trial_dim(std::size_t trial) { return trial % 2 == 0 ? 2 : 64; }
std::size_t trial_hidden(std::size_t trial) { return (trial / 2) % 2 == 0 ? 4 : 32; }

double check_projection(Rng& rng, std::size_t d, double step) {
  std::vector<double> raw(d);
  std::vector<double> upstream(d);
  for (auto& v : raw) v = rng.uniform(-2.0, 2.0);
  for (auto& v : upstream) v = rng.uniform(-1.0, 1.0);
  const auto analytic = project_to_sphere_backward(raw, upstream);
  const auto numeric = numeric_grad(raw, step, [&] { return dot(upstream, project_to_sphere(raw)); });
  return relative_error(analytic, numeric);
}

double check_triplet(Rng& rng, std::size_t d, double step) {
  for (;;) {
    auto a = random_unit(rng, d);
    auto p = random_unit(rng, d);
    auto n = random_unit(rng, d);
    const TripletConfig cfg{rng.uniform(0.0, 2.0)};
    const double hinge = sq_distance(a, p) - sq_distance(a, n) + cfg.alpha;
    if (std::abs(hinge) < kKinkGuard) continue;
    const auto out = triplet_loss(a, p, n, cfg);
    std::vector<double> all(a);
    all.insert(all.end(), p.begin(), p.end());
    all.insert(all.end(), n.begin(), n.end());
    std::vector<double> analytic(out.grad_anchor);
    analytic.insert(analytic.end(), out.grad_positive.begin(), out.grad_positive.end());
    analytic.insert(analytic.end(), out.grad_negative.begin(), out.grad_negative.end());
    const auto numeric = numeric_grad(all, step, [&] {
      const std::span<const double> s(all);
      return triplet_loss(s.subspan(0, d), s.subspan(d, d), s.subspan(2 * d, d), cfg).value;
    });
    return relative_error(analytic, numeric);
  }
}

PolytupletConfig random_loss_config(Rng& rng) {
  PolytupletConfig cfg;
  cfg.margin = rng.uniform(0.0, 2.0);
  cfg.w_hard = rng.uniform(0.5, 2.0);
  cfg.w_semi = rng.uniform(0.5, 2.0);
  cfg.lambda_poly = rng.uniform(0.1, 2.0);
  cfg.lambda_cce = rng.uniform(0.1, 2.0);
  cfg.temperature = rng.uniform(0.5, 2.0);
  return cfg;
}

template <typename LossFn>
double check_batch_loss(Rng& rng, std::size_t d, double step, LossFn loss) {
  for (;;) {
    const std::size_t b = 1 + rng.below(3);
    const std::size_t n = 2 + rng.below(4);
    auto batch = random_batch(rng, b, n, d);
    const auto cfg = random_loss_config(rng);
    if (near_kink(batch, cfg.margin)) continue;
    const LossOutput out = loss(batch, cfg);
    const auto analytic = concat(out.grad_context, out.grad_results);
    std::vector<double> numeric =
        numeric_grad(batch.context.values(), step, [&] { return loss(batch, cfg).value; });
    const auto numeric_results =
        numeric_grad(batch.results.values(), step, [&] { return loss(batch, cfg).value; });
    numeric.insert(numeric.end(), numeric_results.begin(), numeric_results.end());
    return relative_error(analytic, numeric);
  }
}

double check_cce(Rng& rng, double step) {
  const std::size_t b = 1 + rng.below(4);
  const std::size_t n = 2 + rng.below(5);
  Matrix logits(b, n);
  for (auto& v : logits.values()) v = rng.uniform(-3.0, 3.0);
  std::vector<std::size_t> labels(b);
  for (auto& y : labels) y = rng.below(n);
  const auto out = cce_loss(logits, labels);
  const std::vector<double> analytic(out.grad_logits.values().begin(),
                                     out.grad_logits.values().end());
  const auto numeric =
      numeric_grad(logits.values(), step, [&] { return cce_loss(logits, labels).value; });
  return relative_error(analytic, numeric);
}

McqaInstance random_instance(Rng& rng, std::size_t n_answers, std::size_t id) {
  const auto word = [&] { return "w" + std::to_string(rng.below(40)); };
  const auto phrase = [&](std::size_t len) {
    std::string s = word();
    for (std::size_t i = 1; i < len; ++i) s += " " + word();
    return s;
  };
  McqaInstance instance;
  instance.id = "g" + std::to_string(id);
  instance.context = phrase(6);
  instance.question = phrase(3);
  for (std::size_t j = 0; j < n_answers; ++j) instance.answers.push_back(phrase(3));
  instance.label = rng.below(n_answers);
  return instance;
}

// Activation pattern that must stay fixed across a finite-difference stencil.
std::vector<bool> smooth_region(const EncodeResult& encoded, const PolytupletConfig& cfg) {
  std::vector<bool> pattern;
  for (const auto* trace : {&encoded.trace.context, &encoded.trace.result}) {
    for (const double v : trace->pre.values()) pattern.push_back(v > 0.0);
  }
  const Matrix dist = distance_matrix(encoded.batch);
  for (std::size_t i = 0; i < dist.rows(); ++i) {
    const std::size_t y = encoded.batch.labels[i];
    for (std::size_t j = 0; j < dist.cols(); ++j) {
      if (j == y) continue;
      const double gap = dist(i, y) - dist(i, j);
      pattern.push_back(gap >= 0.0);
      pattern.push_back(gap + cfg.margin > 0.0);
    }
  }
  return pattern;
}

double check_encoder(Rng& rng, std::size_t d, std::size_t h, double step, std::size_t& skipped) {
  ModelConfig model;
  model.vocab_dim = 16;
  model.n_gram = rng.below(2) + 1;
  model.hidden = h;
  model.embed_dim = d;
  model.dropout_rate = 0.0;
  auto params = EncoderParams::initialize(model, rng.next());
  // Nonzero biases so both ReLU branches are exercised and a row with every
  // hidden unit dead still has a projectable output.
  for (auto* path : {&params.context, &params.result}) {
    for (auto& v : path->b1) v = rng.uniform(-0.2, 0.2);
    for (auto& v : path->b2) v = rng.uniform(-0.5, 0.5);
  }

  const std::size_t n = 2 + rng.below(3);
  std::vector<McqaInstance> instances;
  for (std::size_t i = 0; i < 2; ++i) instances.push_back(random_instance(rng, n, i));
  const auto features = featurize(instances, model);
  const auto cfg = random_loss_config(rng);

  auto base = encode_features(features, params, Mode::eval, 0);
  const auto pattern = smooth_region(base, cfg);
  const auto loss = hybrid_loss(base.batch, cfg);
  const auto grads =
      encode_backward(std::move(base.trace), loss.total.grad_context, loss.total.grad_results, params);

  std::vector<double> analytic;
  std::vector<double> numeric;
  auto param_tensors = params.tensors();
  const auto grad_tensors = grads.tensors();
  for (std::size_t t = 0; t < param_tensors.size(); ++t) {
    auto values = param_tensors[t];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      bool smooth = true;
      const auto eval_at = [&](double v) {
        values[k] = v;
        const auto encoded = encode_features(features, params, Mode::eval, 0);
        smooth = smooth && smooth_region(encoded, cfg) == pattern;
        return hybrid_loss(encoded.batch, cfg).total.value;
      };
      const double up = eval_at(saved + step);
      const double down = eval_at(saved - step);
      values[k] = saved;
      if (!smooth) {
        ++skipped;
        continue;
      }
      analytic.push_back(grad_tensors[t][k]);
      numeric.push_back((up - down) / (2.0 * step));
    }
  }
  return relative_error(analytic, numeric);
}

}  // namespace

std::vector<GradcheckComponent> run_gradcheck(const GradcheckOptions& options) {
  if (options.trials < 1) throw ConfigError("gradcheck needs at least one trial");
  if (!(options.tolerance > 0.0)) throw ConfigError("gradcheck tolerance must be positive");
  if (!(options.step > 0.0)) throw ConfigError("gradcheck step must be positive");

  std::vector<GradcheckComponent> out;
  const auto run = [&](const std::string& name, std::uint64_t stream, auto&& check) {
    GradcheckComponent c;
    c.name = name;
    for (std::size_t t = 0; t < options.trials; ++t) {
      Rng rng(derive_seed(options.seed, stream, t));
      c.max_rel_error = std::max(c.max_rel_error, check(rng, t, c.skipped));
      ++c.trials;
    }
    c.passed = c.max_rel_error < options.tolerance;
    out.push_back(c);
  };
  const double step = options.step;
  run("sphere_projection", 1, [&](Rng& rng, std::size_t t, std::size_t&) {
    return check_projection(rng, trial_dim(t), step);
  });
  run("triplet", 2, [&](Rng& rng, std::size_t t, std::size_t&) {
    return check_triplet(rng, trial_dim(t), step);
  });
  run("polytuplet", 3, [&](Rng& rng, std::size_t t, std::size_t&) {
    return check_batch_loss(rng, trial_dim(t), step,
                            [](const EmbeddingBatch& b, const PolytupletConfig& c) {
                              return polytuplet_loss(b, c);
                            });
  });
  run("cce", 4, [&](Rng& rng, std::size_t, std::size_t&) { return check_cce(rng, step); });
  run("hybrid", 5, [&](Rng& rng, std::size_t t, std::size_t&) {
    return check_batch_loss(rng, trial_dim(t), step,
                            [](const EmbeddingBatch& b, const PolytupletConfig& c) {
                              return hybrid_loss(b, c).total;
                            });
  });
  run("encoder", 6, [&](Rng& rng, std::size_t t, std::size_t& skipped) {
    return check_encoder(rng, trial_dim(t), trial_hidden(t), step, skipped);
  });
  return out;
}

}  // namespace polytuplet
