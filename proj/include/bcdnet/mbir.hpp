#pragma once

#include "core.hpp"
#include "geometry.hpp"
#include "projector.hpp"

namespace bcdnet {

/// One image update subproblem: statistically weighted data fit plus a
/// quadratic pull toward the prior image z, minimized over non-negative
/// images. Owns copies of its inputs, so a problem can be shared across
/// threads freely.
struct MbirProblem {
  Sinogram y;
  StatWeights weights;
  Image z;
  double beta = 1.0;
  Geometry geom;
};

inline void validate(const MbirProblem& prob) {
  validate(prob.geom);
  require_match(prob.geom, prob.y, "mbir problem (measurements)");
  require_match(prob.geom, prob.weights, "mbir problem (weights)");
  require_match(prob.geom, prob.z, "mbir problem (prior image)");
  require(prob.beta > 0.0, "mbir problem: beta must be positive");
  require(all_finite(prob.y.values) && all_finite(prob.z.values),
          "mbir problem: non-finite data");
  for (double w : prob.weights.values)
    require(w >= 0.0 && std::isfinite(w), "mbir problem: weights must be finite and >= 0");
}

/// F(x) = 1/2 |y - Ax|^2_W + beta/2 |x - z|^2. Costs one forward projection.
inline double objective(const Image& x, const MbirProblem& prob) {
  require_match(prob.geom, x, "objective");
  const Sinogram ax = forward_project(x, prob.geom);
  double data = 0.0;
  for (std::size_t m = 0; m < ax.size(); ++m)
    data += prob.weights.values[m] * sq(prob.y.values[m] - ax.values[m]);
  double reg = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) reg += sq(x.values[i] - prob.z.values[i]);
  return 0.5 * data + 0.5 * prob.beta * reg;
}

/// Diagonal majorizer M = diag(A^T W A 1) + beta I. Since A and W are
/// entrywise non-negative, M dominates the Hessian A^T W A + beta I, which
/// makes the projected majorized step a true descent step. Costs one
/// forward and one back projection; build once per (geometry, W, beta).
struct MajorizerDiag {
  std::vector<double> diag;  // one entry per pixel, each >= beta
};

inline MajorizerDiag build_majorizer(const Geometry& g, const StatWeights& w, double beta) {
  validate(g);
  require_match(g, w, "build_majorizer");
  require(beta > 0.0, "build_majorizer: beta must be positive");
  const Image ones(g.image_width, g.image_height, g.pixel_size, 1.0);
  Sinogram a1 = forward_project(ones, g);
  for (std::size_t m = 0; m < a1.size(); ++m) {
    const double wm = w.values[m];
    require(wm >= 0.0 && std::isfinite(wm), "build_majorizer: weights must be finite and >= 0");
    a1.values[m] *= wm;
  }
  const Image col = back_project(a1, g);
  MajorizerDiag m;
  m.diag.resize(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) m.diag[i] = col.values[i] + beta;
  return m;
}

enum class SolverVariant { apgm, pgm };

struct SolverConfig {
  int iterations = 30;
  SolverVariant variant = SolverVariant::apgm;
  bool record_trace = false;  // per-iteration objective (one extra forward each) and step norm
};

struct SolveTrace {
  std::vector<double> objectives;
  std::vector<double> step_norms;
  long forward_calls = 0;
  long back_calls = 0;
};

struct SolveResult {
  Image image;
  SolveTrace trace;
};

/// Momentum recurrence t_{j+1} = (1 + sqrt(1 + 4 t_j^2)) / 2, from t_0 = 1.
inline double momentum_next(double t) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t)); }

/// Accelerated projected gradient with the diagonal majorizer as step
/// metric. Each iteration takes a majorized gradient step from the
/// extrapolated point v, projects onto the non-negative orthant, and (in
/// the accelerated variant) extrapolates with the momentum weight
/// (t_j - 1) / t_{j+1}. The plain variant skips the extrapolation, which
/// makes every iterate monotone in F. iterations = 0 returns x_init as is.
inline SolveResult apgm_solve(const MbirProblem& prob, const Image& x_init,
                              const MajorizerDiag& majorizer, const SolverConfig& cfg) {
  validate(prob);
  require_match(prob.geom, x_init, "apgm_solve");
  require(all_finite(x_init.values), "apgm_solve: non-finite start image");
  require(majorizer.diag.size() == x_init.size(), "apgm_solve: majorizer size mismatch");
  require(cfg.iterations >= 0, "apgm_solve: iterations must be >= 0");

  const ProjectorCounters before = projector_counters();
  const long n = static_cast<long>(x_init.size());
  SolveResult result;
  Image x = x_init;       // current iterate
  Image v = x_init;       // extrapolated point
  Image x_next(prob.geom.image_width, prob.geom.image_height, prob.geom.pixel_size);
  double t = 1.0;

  for (int j = 0; j < cfg.iterations; ++j) {
    Sinogram av = forward_project(v, prob.geom);
    for (std::size_t m = 0; m < av.size(); ++m)
      av.values[m] = prob.weights.values[m] * (prob.y.values[m] - av.values[m]);
    const Image grad_fit = back_project(av, prob.geom);  // A^T W (y - Av)

    for (long i = 0; i < n; ++i) {
      const double descent =
          grad_fit.values[i] - prob.beta * (v.values[i] - prob.z.values[i]);
      x_next.values[i] = std::max(v.values[i] + descent / majorizer.diag[i], 0.0);
    }

    const double t_next = momentum_next(t);
    if (cfg.variant == SolverVariant::apgm) {
      const double momentum = (t - 1.0) / t_next;
      for (long i = 0; i < n; ++i)
        v.values[i] = x_next.values[i] + momentum * (x_next.values[i] - x.values[i]);
    } else {
      v.values = x_next.values;
    }

    if (cfg.record_trace) {
      double step = 0.0;
      for (long i = 0; i < n; ++i) step += sq(x_next.values[i] - x.values[i]);
      result.trace.step_norms.push_back(std::sqrt(step));
      result.trace.objectives.push_back(objective(x_next, prob));
    }
    x.values = x_next.values;
    t = t_next;
  }

  const ProjectorCounters after = projector_counters();
  result.trace.forward_calls = after.forward - before.forward;
  result.trace.back_calls = after.back - before.back;
  result.image = std::move(x);
  return result;
}

}  // namespace bcdnet
