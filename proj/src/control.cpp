#include "scbf/control.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "scbf/solve/anderson.hpp"

namespace scbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Vec stack(const std::vector<Vec>& parts) {
  Eigen::Index total = 0;
  for (const Vec& p : parts) total += p.size();
  Vec out(total);
  Eigen::Index off = 0;
  for (const Vec& p : parts) {
    out.segment(off, p.size()) = p;
    off += p.size();
  }
  return out;
}

std::vector<Vec> unstack(const Vec& z, int m, int N) {
  std::vector<Vec> out(N);
  for (int i = 0; i < N; ++i) out[i] = z.segment(i * m, m);
  return out;
}

// sum_i |x_i(B) - x_i(A)| over the rolled-out plans, i = 0..N.
double plan_change(const RobotModel& model, const Vec& x_k, const Vec& A, const Vec& B, int m, int N) {
  const auto xa = rollout(model, x_k, unstack(A, m, N));
  const auto xb = rollout(model, x_k, unstack(B, m, N));
  double change = 0.0;
  for (int i = 0; i <= N; ++i) change += (xb[i] - xa[i]).norm();
  return change;
}

// Removes the solver's tolerance-level excursions outside the input box.
Vec clamp_inputs(const Vec& U, const MpcConfig& cfg, int N) {
  Vec out = U;
  for (int i = 0; i < N; ++i) {
    const auto m = cfg.input_lower.size();
    out.segment(i * m, m) = out.segment(i * m, m).cwiseMax(cfg.input_lower).cwiseMin(cfg.input_upper);
  }
  return out;
}

// Rollout with sensitivities d x_i / d U around a reference input sequence.
struct Horizon {
  int n = 0;
  int m = 0;
  int N = 0;
  Vec U_ref;
  std::vector<Vec> states;  // x_0 .. x_N
  std::vector<Mat> sens;    // d x_i / d U, n x (m N)

  // x_i(U) ~ offset(i) + sens[i] U
  Vec offset(int i) const { return states[i] - sens[i] * U_ref; }
};

Horizon linearize(const RobotModel& model, const Vec& x0, const Vec& U_ref, int N) {
  Horizon hz;
  hz.n = model.state_dim();
  hz.m = model.input_dim();
  hz.N = N;
  hz.U_ref = U_ref;
  const auto inputs = unstack(U_ref, hz.m, N);
  hz.states = rollout(model, x0, inputs);
  hz.sens.assign(N + 1, Mat::Zero(hz.n, hz.m * N));
  for (int i = 0; i < N; ++i) {
    const Mat A = model.state_jacobian(hz.states[i], inputs[i]);
    const Mat B = model.input_matrix(hz.states[i]);
    // Columns beyond block i are zero.
    hz.sens[i + 1].leftCols(i * hz.m).noalias() = A * hz.sens[i].leftCols(i * hz.m);
    hz.sens[i + 1].middleCols(i * hz.m, hz.m) = B;
  }
  return hz;
}

bool depends_on_inputs(const Mat& rows) { return rows.cwiseAbs().maxCoeff() > 0.0; }

Vec repeat(const Vec& v, int N) {
  Vec out(v.size() * N);
  for (int i = 0; i < N; ++i) out.segment(i * v.size(), v.size()) = v;
  return out;
}

Mat block_diag(const Mat& R, int N) {
  const auto m = R.rows();
  Mat out = Mat::Zero(m * N, m * N);
  for (int i = 0; i < N; ++i) out.block(i * m, i * m, m, m) = R;
  return out;
}

const Vec& lower_at(const MpcConfig& cfg, int i) {
  return (i == cfg.horizon && cfg.terminal_lower.size() > 0) ? cfg.terminal_lower : cfg.state_lower;
}

const Vec& upper_at(const MpcConfig& cfg, int i) {
  return (i == cfg.horizon && cfg.terminal_upper.size() > 0) ? cfg.terminal_upper : cfg.state_upper;
}

// Tracking objective  sum_{i=1}^{N-1} |x_i - r|_Q^2 + |x_N - r|_P^2 + sum_i |u_i|_R^2
// as 1/2 U^T H U + g^T U + c about the linearization.
void tracking_quadratic(const Horizon& hz, int k, const MpcConfig& cfg, Mat& H, Vec& g, double& c) {
  const int dim = hz.m * hz.N;
  H = 2.0 * block_diag(cfg.R, hz.N);
  g = Vec::Zero(dim);
  c = 0.0;
  for (int i = 1; i <= hz.N; ++i) {
    const Mat& weight = i == hz.N ? cfg.P : cfg.Q;
    const Mat& S = hz.sens[i];
    const Vec r = hz.offset(i) - cfg.reference(k + i);
    const Mat WS = weight * S;
    H.noalias() += 2.0 * S.transpose() * WS;
    g.noalias() += 2.0 * WS.transpose() * r;
    c += r.dot(weight * r);
  }
}

double tracking_cost(const RobotModel& model, const Vec& x_k, int k, const std::vector<Vec>& inputs,
                     const MpcConfig& cfg) {
  const auto xs = rollout(model, x_k, inputs);
  double cost = 0.0;
  for (int i = 1; i <= cfg.horizon; ++i) {
    const Mat& weight = i == cfg.horizon ? cfg.P : cfg.Q;
    const Vec r = xs[i] - cfg.reference(k + i);
    cost += r.dot(weight * r);
  }
  for (const Vec& u : inputs) cost += u.dot(cfg.R * u);
  return cost;
}

// Input-dependent state-bound rows  G U <= h  not already implied by the input box.
void state_rows(const Horizon& hz, const MpcConfig& cfg, Mat& G, Vec& h) {
  const Vec lo_u = repeat(cfg.input_lower, hz.N);
  const Vec hi_u = repeat(cfg.input_upper, hz.N);
  const Vec mid = 0.5 * (lo_u + hi_u);
  const Vec half = 0.5 * (hi_u - lo_u);
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  for (int i = 1; i <= hz.N; ++i) {
    const Vec c = hz.offset(i);
    const Vec& lo = lower_at(cfg, i);
    const Vec& hi = upper_at(cfg, i);
    for (int r = 0; r < hz.n; ++r) {
      const auto row = hz.sens[i].row(r);
      if (!depends_on_inputs(row)) continue;
      const double centre = c[r] + row.dot(mid);
      const double reach = row.cwiseAbs().dot(half);
      if (std::isfinite(hi[r]) && centre + reach > hi[r]) {
        rows.push_back(row);
        rhs.push_back(hi[r] - c[r]);
      }
      if (std::isfinite(lo[r]) && centre - reach < lo[r]) {
        rows.push_back(-row);
        rhs.push_back(c[r] - lo[r]);
      }
    }
  }
  G.resize(static_cast<Eigen::Index>(rows.size()), hz.m * hz.N);
  h.resize(static_cast<Eigen::Index>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    G.row(static_cast<Eigen::Index>(r)) = rows[r];
    h[static_cast<Eigen::Index>(r)] = rhs[r];
  }
}

// Signed distances to the state bounds at the rows that depend on the inputs.
Vec state_bound_residuals(const Horizon& hz, const MpcConfig& cfg) {
  std::vector<double> out;
  for (int i = 1; i <= hz.N; ++i) {
    const Vec& lo = lower_at(cfg, i);
    const Vec& hi = upper_at(cfg, i);
    for (int r = 0; r < hz.n; ++r) {
      if (!depends_on_inputs(hz.sens[i].row(r))) continue;
      if (std::isfinite(hi[r])) out.push_back(hi[r] - hz.states[i][r]);
      if (std::isfinite(lo[r])) out.push_back(hz.states[i][r] - lo[r]);
    }
  }
  return Eigen::Map<Vec>(out.data(), static_cast<Eigen::Index>(out.size()));
}

struct ObstaclePath {
  const ObstacleSpec* spec;
  std::vector<Vec> means;  // o_0 (measured), o_1 .. o_N
};

std::vector<ObstaclePath> predict_paths(const std::vector<TrackedObstacle>& obstacles, int N) {
  std::vector<ObstaclePath> paths;
  paths.reserve(obstacles.size());
  for (const TrackedObstacle& ob : obstacles) {
    ObstaclePath p{&ob.spec, {ob.state}};
    for (Vec& o : predict_obstacle_means(ob.spec, ob.state, N)) p.means.push_back(std::move(o));
    paths.push_back(std::move(p));
  }
  return paths;
}

// Steps i whose successor position depends on the inputs.
std::vector<int> enforced_steps(const Horizon& hz, const BarrierConfig& bc) {
  std::vector<int> steps;
  for (int i = 0; i < hz.N; ++i) {
    if (depends_on_inputs(bc.selector * hz.sens[i + 1])) steps.push_back(i);
  }
  return steps;
}

std::vector<Margin> margins_on(const Horizon& hz, const std::vector<ObstaclePath>& paths,
                               const BarrierConfig& bc, const RobotModel& model) {
  std::vector<Margin> out;
  const auto inputs = unstack(hz.U_ref, hz.m, hz.N);
  for (int i : enforced_steps(hz, bc)) {
    for (size_t j = 0; j < paths.size(); ++j) {
      const auto mom = cbc_moments(hz.states[i], paths[j].means[i], model, *paths[j].spec, bc);
      out.push_back({i, static_cast<int>(j), chance_margin(mom, inputs[i], bc)});
    }
  }
  return out;
}

double min_of(const std::vector<Margin>& margins) {
  double v = kInf;
  for (const Margin& mg : margins) v = std::min(v, mg.value);
  return v;
}

// Point at which the mean is linearized. Along the ray through e the margin is
//   s^2 |e|_W^2 + kappa - |[s a W e; beta]|,
// which for |e| below the variance-dominated radius decreases outward; a
// tangent taken there points into the obstacle. Moving the tangent point out
// to the first s >= 1 where the margin is zero keeps the under-estimate valid
// and gives a usable direction.
Vec support_point(const Vec& e, const Mat& W, double kappa, double a, double beta) {
  const double m0 = e.dot(W * e);
  if (!(m0 > 0.0)) return e;
  const double B = a * a * (W * e).squaredNorm();
  const double C = beta * beta;
  const auto margin = [&](double y) { return y * m0 + kappa - std::sqrt(y * B + C); };
  if (margin(1.0) >= 0.0) return e;
  // Largest root of (y m0 + kappa)^2 = y B + C.
  const double qa = m0 * m0;
  const double qb = 2.0 * m0 * kappa - B;
  const double qc = kappa * kappa - C;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return e;
  const double y = (-qb + std::sqrt(disc)) / (2.0 * qa);
  if (!(y > 1.0) || y * m0 + kappa < 0.0) return e;
  return std::sqrt(y) * e;
}

// Decision layout for the convex models: [U; t_1 .. t_T; slack].
struct ChanceBlock {
  std::vector<SocConstraint> cones;
  int num_aux = 0;
};

// Inner approximations of every enforced chance constraint about hz.U_ref.
// `dim` is the full decision length; auxiliaries start at `aux_offset` and the
// shared slack sits at `slack_index`.
ChanceBlock chance_cones(const Horizon& hz, const std::vector<ObstaclePath>& paths,
                         const BarrierConfig& bc, int aux_offset, int dim, int slack_index) {
  const double cdelta = confidence_scale(bc.delta);
  if (cdelta < 0.0) throw std::invalid_argument("chance constraints need delta >= 0.5");
  const int nu = hz.m * hz.N;
  const double decay = 1.0 - bc.gamma;
  ChanceBlock block;
  int aux = aux_offset;
  for (int i : enforced_steps(hz, bc)) {
    const Mat Je = bc.selector * hz.sens[i + 1];
    const Mat Jd = bc.selector * hz.sens[i];
    const bool epigraph = decay > 0.0 && depends_on_inputs(Jd);
    for (const ObstaclePath& path : paths) {
      const ObstacleSpec& spec = *path.spec;
      const Mat& W = spec.shape;
      const double sigma2 = spec.noise_var;
      const double sigma = std::sqrt(sigma2);
      const Vec e_ref = bc.selector * hz.states[i + 1] - path.means[i + 1];
      const Vec d_ref = bc.selector * hz.states[i] - path.means[i];
      const int no = static_cast<int>(W.rows());
      const double beta = cdelta * sigma2 * std::sqrt(2.0 * (W.transpose() * W).trace());
      const double kappa = sigma2 * W.trace() - 1.0 - bc.zeta - decay * (d_ref.dot(W * d_ref) - 1.0);
      const Vec p = support_point(e_ref, W, kappa, 2.0 * cdelta * sigma, beta);
      const Vec Wp = W * p;

      SocConstraint soc;
      soc.A = Mat::Zero(no + 1, dim);
      soc.b = Vec::Zero(no + 1);
      if (cdelta * sigma > 0.0) {
        const double scale = 2.0 * cdelta * sigma;
        soc.A.topLeftCorner(no, nu) = scale * (W * Je);
        soc.b.head(no) = scale * (W * (e_ref - Je * hz.U_ref));
        soc.b[no] = beta;
      }
      // Tangent of the convex mean |e|_W^2 at p, a global under-estimator.
      soc.c = Vec::Zero(dim);
      const Vec grad = 2.0 * Je.transpose() * Wp;
      soc.c.head(nu) = grad;
      soc.e = 2.0 * Wp.dot(e_ref) - p.dot(Wp) - grad.dot(hz.U_ref) + sigma2 * W.trace() - 1.0 - bc.zeta;
      if (epigraph) {
        soc.c[aux] = -1.0;
        soc.e += decay;
      } else {
        soc.e -= decay * (d_ref.dot(W * d_ref) - 1.0);
      }
      if (slack_index >= 0) soc.c[slack_index] = 1.0;
      block.cones.push_back(std::move(soc));

      if (epigraph) {
        // t >= (1 - gamma) |d(U)|_W^2  as  |[2 sqrt(1-gamma) L^T d(U); t - 1]| <= t + 1.
        const Mat Lt = Eigen::LLT<Mat>(W).matrixU();
        const double r = 2.0 * std::sqrt(decay);
        SocConstraint rot;
        rot.A = Mat::Zero(no + 1, dim);
        rot.b = Vec::Zero(no + 1);
        rot.A.topLeftCorner(no, nu) = r * (Lt * Jd);
        rot.b.head(no) = r * (Lt * (d_ref - Jd * hz.U_ref));
        rot.A(no, aux) = 1.0;
        rot.b[no] = -1.0;
        rot.c = Vec::Zero(dim);
        rot.c[aux] = 1.0;
        rot.e = 1.0;
        block.cones.push_back(std::move(rot));
        ++aux;
        ++block.num_aux;
      }
    }
  }
  return block;
}

int count_aux(const Horizon& hz, const std::vector<ObstaclePath>& paths, const BarrierConfig& bc) {
  if (bc.gamma >= 1.0) return 0;
  int count = 0;
  for (int i : enforced_steps(hz, bc)) {
    if (depends_on_inputs(bc.selector * hz.sens[i])) count += static_cast<int>(paths.size());
  }
  return count;
}

// Assembles [U; aux; slack] with the given quadratic objective in U.
ConvexModel assemble(const Horizon& hz, const std::vector<ObstaclePath>& paths,
                     const BarrierConfig& bc, const MpcConfig& cfg, const Mat& H, const Vec& g,
                     double constant, const Mat* G_rows, const Vec* h_rows) {
  const int nu = hz.m * hz.N;
  const int naux = count_aux(hz, paths, bc);
  const int dim = nu + naux + 1;
  const int slack = dim - 1;

  ConvexModel model;
  model.slack_index = slack;
  ConicProblem& p = model.problem;
  p.P = Mat::Zero(dim, dim);
  p.P.topLeftCorner(nu, nu) = H;
  p.q = Vec::Zero(dim);
  p.q.head(nu) = g;
  p.constant = constant;
  p.lower = Vec::Constant(dim, -kInf);
  p.upper = Vec::Constant(dim, kInf);
  p.lower.head(nu) = repeat(cfg.input_lower, hz.N);
  p.upper.head(nu) = repeat(cfg.input_upper, hz.N);
  p.lower[slack] = 0.0;

  ChanceBlock block = chance_cones(hz, paths, bc, nu, dim, slack);
  p.soc_constraints = std::move(block.cones);

  if (G_rows && G_rows->rows() > 0) {
    p.G = Mat::Zero(G_rows->rows(), dim);
    p.G.leftCols(nu) = *G_rows;
    p.G.col(slack).setConstant(-1.0);
    p.h = *h_rows;
  }
  return model;
}

std::vector<Vec> initial_inputs(const MpcConfig& cfg, const RobotModel& model,
                                const std::optional<std::vector<Vec>>& warm) {
  if (warm && static_cast<int>(warm->size()) == cfg.horizon) {
    bool ok = true;
    for (const Vec& u : *warm) ok = ok && u.size() == model.input_dim() && u.allFinite();
    if (ok) return *warm;
  }
  return std::vector<Vec>(cfg.horizon, Vec::Zero(model.input_dim()));
}

std::vector<TrackedObstacle> noise_free(std::vector<TrackedObstacle> obstacles) {
  for (TrackedObstacle& ob : obstacles) ob.spec.noise_var = 0.0;
  return obstacles;
}

}  // namespace

void MpcConfig::validate(const RobotModel& model) const {
  const int n = model.state_dim();
  const int m = model.input_dim();
  if (horizon < 1) throw std::invalid_argument("mpc: horizon must be >= 1");
  auto square = [](const Mat& M, int d) { return M.rows() == d && M.cols() == d; };
  if (!square(P, n) || !square(Q, n) || !square(R, m)) {
    throw DimensionError("mpc: weight matrices have the wrong size");
  }
  auto psd = [](const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    return (M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + M.cwiseAbs().maxCoeff()) &&
           es.eigenvalues().minCoeff() >= -1e-12 * (1.0 + M.cwiseAbs().maxCoeff());
  };
  if (!psd(P) || !psd(Q)) throw std::invalid_argument("mpc: P and Q must be positive semidefinite");
  if (!psd(R) || Eigen::LLT<Mat>(R).info() != Eigen::Success) {
    throw std::invalid_argument("mpc: R must be positive definite");
  }
  require_dim(state_lower, n, "mpc state_lower");
  require_dim(state_upper, n, "mpc state_upper");
  require_dim(input_lower, m, "mpc input_lower");
  require_dim(input_upper, m, "mpc input_upper");
  if ((state_lower.array() > state_upper.array()).any() ||
      (input_lower.array() > input_upper.array()).any()) {
    throw std::invalid_argument("mpc: bounds must be non-empty");
  }
  if (terminal_lower.size() > 0 || terminal_upper.size() > 0) {
    require_dim(terminal_lower, n, "mpc terminal_lower");
    require_dim(terminal_upper, n, "mpc terminal_upper");
    if ((terminal_lower.array() > terminal_upper.array()).any()) {
      throw std::invalid_argument("mpc: terminal set must be non-empty");
    }
  }
  if (!reference) throw std::invalid_argument("mpc: reference is not set");
}

std::string to_string(DecisionStatus status) {
  return status == DecisionStatus::Feasible ? "Feasible" : "Infeasible";
}

double ControlDecision::min_margin() const { return min_of(margins); }

std::vector<Margin> plan_margins(const RobotModel& model, const Vec& x_k,
                                 const std::vector<Vec>& inputs,
                                 const std::vector<TrackedObstacle>& obstacles,
                                 const BarrierConfig& barrier_cfg) {
  const int N = static_cast<int>(inputs.size());
  if (N == 0) return {};
  const Horizon hz = linearize(model, x_k, stack(inputs), N);
  return margins_on(hz, predict_paths(obstacles, N), barrier_cfg, model);
}

std::vector<Vec> shift_plan(const std::vector<Vec>& inputs) {
  if (inputs.empty()) return {};
  std::vector<Vec> out(inputs.begin() + 1, inputs.end());
  out.push_back(inputs.back());
  return out;
}

ControlDecision nominal_mpc(const Vec& x_k, int k, const MpcConfig& cfg, const RobotModel& model,
                            const std::optional<std::vector<Vec>>& warm_start) {
  const auto start = Clock::now();
  require_dim(x_k, model.state_dim(), "state");
  const int N = cfg.horizon;
  const int m = model.input_dim();

  ControlDecision dec;
  dec.stage = "nominal";
  Vec U = stack(initial_inputs(cfg, model, warm_start));
  bool solved = false;
  // Gauss-Newton on the tracking cost; a single pass for linear models.
  for (int pass = 0; pass < 10; ++pass) {
    const Horizon hz = linearize(model, x_k, U, N);
    ConicProblem p;
    tracking_quadratic(hz, k, cfg, p.P, p.q, p.constant);
    p.lower = repeat(cfg.input_lower, N);
    p.upper = repeat(cfg.input_upper, N);
    state_rows(hz, cfg, p.G, p.h);
    const SolveResult res = solve_conic(p, std::nullopt, cfg.scp.conic);
    dec.inner_iterations += res.iterations;
    ++dec.outer_iterations;
    if (res.status != SolveStatus::Optimal) {
      solved = false;
      dec.diagnostic = "nominal QP: " + to_string(res.status);
      break;
    }
    solved = true;
    const double step = (res.decision - U).norm();
    U = res.decision;
    // Exact for models whose linearization does not move.
    const Horizon check = linearize(model, x_k, U, N);
    double mismatch = 0.0;
    for (int i = 0; i <= N; ++i) {
      mismatch = std::max(mismatch, (check.states[i] - (hz.offset(i) + hz.sens[i] * U)).cwiseAbs().maxCoeff());
    }
    if (mismatch <= 1e-12 * (1.0 + x_k.cwiseAbs().maxCoeff()) || step <= 1e-9) break;
  }
  U = clamp_inputs(U, cfg, N);
  dec.planned_inputs = unstack(U, m, N);
  dec.predicted_states = rollout(model, x_k, dec.planned_inputs);
  dec.applied_input = dec.planned_inputs.front();
  dec.objective = tracking_cost(model, x_k, k, dec.planned_inputs, cfg);
  dec.status = solved ? DecisionStatus::Feasible : DecisionStatus::Infeasible;
  dec.solve_time = seconds_since(start);
  return dec;
}

ControlDecision cc_mpc_cbf(const Vec& x_k, int k, const std::vector<TrackedObstacle>& obstacles,
                           const MpcConfig& cfg, const BarrierConfig& barrier_cfg,
                           const RobotModel& model,
                           const std::optional<std::vector<Vec>>& warm_start) {
  const auto start = Clock::now();
  const int N = cfg.horizon;
  const int m = model.input_dim();
  const auto paths = predict_paths(obstacles, N);

  // Without barrier constraints the problem is the nominal QP; if its
  // solution already satisfies them it is optimal here too.
  ControlDecision nominal = nominal_mpc(x_k, k, cfg, model, warm_start);
  if (nominal.feasible()) {
    nominal.margins = plan_margins(model, x_k, nominal.planned_inputs, obstacles, barrier_cfg);
    if (min_of(nominal.margins) >= 0.0) {
      nominal.stage = "one-shot";
      nominal.solve_time = seconds_since(start);
      return nominal;
    }
  }

  // The violation penalty is absolute, so the cost is brought to unit scale.
  const double scale = std::max({cfg.P.cwiseAbs().maxCoeff(), cfg.Q.cwiseAbs().maxCoeff(),
                                 cfg.R.cwiseAbs().maxCoeff()});
  NonconvexProgram prog;
  prog.dimension = m * N;
  prog.lower = repeat(cfg.input_lower, N);
  prog.upper = repeat(cfg.input_upper, N);
  prog.objective = [&](const Vec& U) {
    return tracking_cost(model, x_k, k, unstack(U, m, N), cfg) / scale;
  };
  prog.constraints = [&](const Vec& U) {
    const Horizon hz = linearize(model, x_k, U, N);
    const auto margins = margins_on(hz, paths, barrier_cfg, model);
    const Vec bounds = state_bound_residuals(hz, cfg);
    Vec g(static_cast<Eigen::Index>(margins.size()) + bounds.size());
    for (size_t r = 0; r < margins.size(); ++r) g[static_cast<Eigen::Index>(r)] = margins[r].value;
    g.tail(bounds.size()) = bounds;
    return g;
  };
  // Same plan-level stopping measure as the safety filter.
  prog.step_measure = [&](const Vec& A, const Vec& B) { return plan_change(model, x_k, A, B, m, N); };
  prog.convexifier = [&](const Vec& U) {
    const Horizon hz = linearize(model, x_k, U, N);
    Mat H;
    Vec g;
    double c = 0.0;
    tracking_quadratic(hz, k, cfg, H, g, c);
    Mat G;
    Vec h;
    state_rows(hz, cfg, G, h);
    return assemble(hz, paths, barrier_cfg, cfg, H / scale, g / scale, c / scale, &G, &h);
  };

  Vec init;
  if (warm_start && static_cast<int>(warm_start->size()) == N) {
    init = stack(initial_inputs(cfg, model, warm_start));
  } else {
    init = stack(nominal.planned_inputs);
  }
  const ScpResult res = solve_scp(prog, init, cfg.max_outer, cfg.trust_radius, cfg.scp);

  ControlDecision dec;
  dec.stage = "one-shot";
  dec.planned_inputs = unstack(clamp_inputs(res.decision.head(m * N), cfg, N), m, N);
  dec.predicted_states = rollout(model, x_k, dec.planned_inputs);
  dec.applied_input = dec.planned_inputs.front();
  dec.margins = plan_margins(model, x_k, dec.planned_inputs, obstacles, barrier_cfg);
  dec.objective = tracking_cost(model, x_k, k, dec.planned_inputs, cfg);
  dec.inner_iterations = nominal.inner_iterations + res.inner_iterations;
  dec.outer_iterations = res.outer_iterations;
  const bool ok = res.status == SolveStatus::Optimal && min_of(dec.margins) >= -1e-6;
  dec.status = ok ? DecisionStatus::Feasible : DecisionStatus::Infeasible;
  if (!ok) dec.diagnostic = "scp: " + to_string(res.status);
  dec.solve_time = seconds_since(start);
  return dec;
}

ControlDecision det_mpc_cbf(const Vec& x_k, int k, const std::vector<TrackedObstacle>& obstacles,
                            const MpcConfig& cfg, const BarrierConfig& barrier_cfg,
                            const RobotModel& model,
                            const std::optional<std::vector<Vec>>& warm_start) {
  return cc_mpc_cbf(x_k, k, noise_free(obstacles), cfg, barrier_cfg, model, warm_start);
}

ControlDecision cc_mpc_dc(const Vec& x_k, int k, const std::vector<TrackedObstacle>& obstacles,
                          const MpcConfig& cfg, const BarrierConfig& barrier_cfg,
                          const RobotModel& model,
                          const std::optional<std::vector<Vec>>& warm_start) {
  BarrierConfig distance = barrier_cfg;
  distance.gamma = 1.0;
  return cc_mpc_cbf(x_k, k, obstacles, cfg, distance, model, warm_start);
}

ControlDecision safety_filter(const ControlDecision& nominal, const Vec& x_k, int k,
                              const std::vector<TrackedObstacle>& obstacles, const MpcConfig& cfg,
                              const BarrierConfig& barrier_cfg, const RobotModel& model,
                              const FilterSettings& settings,
                              const std::optional<std::vector<Vec>>& warm_start) {
  (void)k;
  const auto start = Clock::now();
  const int N = static_cast<int>(nominal.planned_inputs.size());
  if (N != cfg.horizon) throw std::invalid_argument("safety_filter: nominal plan has wrong length");
  const int m = model.input_dim();
  const Vec U_nom = stack(nominal.planned_inputs);

  ControlDecision dec = nominal;
  dec.stage = "filter";
  dec.objective = 0.0;
  dec.outer_iterations = 1;
  dec.inner_iterations = 0;
  dec.state_changes.clear();
  dec.margins = plan_margins(model, x_k, nominal.planned_inputs, obstacles, barrier_cfg);
  if (!nominal.feasible()) {
    dec.diagnostic = "nominal plan is infeasible";
    dec.solve_time = seconds_since(start);
    return dec;
  }
  if (min_of(dec.margins) >= 0.0) {
    dec.stop_criterion_met = true;
    dec.state_changes.push_back(0.0);
    dec.solve_time = seconds_since(start);
    return dec;
  }

  const auto paths = predict_paths(obstacles, N);
  const Mat H = 2.0 * block_diag(cfg.R, N);
  const Vec g = -H * U_nom;
  const double c = 0.5 * U_nom.dot(H * U_nom);

  Vec U = (warm_start && static_cast<int>(warm_start->size()) == N)
              ? stack(initial_inputs(cfg, model, warm_start))
              : U_nom;
  // Every linearization point yields an inner approximation, so the point can
  // be chosen freely: Anderson mixing of the fixed-point map Y -> U(Y) over the
  // last few iterations replaces the slow creep of the plain iteration along
  // the keep-out boundary. The history restarts when the residual grows.
  Horizon hz = linearize(model, x_k, U, N);
  Vec Y = U;
  AndersonMixer mixer(settings.anderson_depth);
  int streak = 0;
  dec.outer_iterations = 0;
  for (int j = 0; j < settings.j_max; ++j) {
    const Horizon lin = j == 0 ? hz : linearize(model, x_k, Y, N);
    const ConvexModel cm = assemble(lin, paths, barrier_cfg, cfg, H, g, c, nullptr, nullptr);
    double slack = 0.0;
    int inner = 0;
    const SolveResult res = solve_with_slack(cm, settings.slack, settings.conic, &slack, &inner);
    dec.inner_iterations += inner;
    dec.outer_iterations = j + 1;
    if (res.status != SolveStatus::Optimal) {
      dec.status = DecisionStatus::Infeasible;
      dec.infeasible_iteration = j;
      dec.diagnostic = "filter subproblem: " + to_string(res.status);
      break;
    }
    streak = slack > settings.slack.tolerance ? streak + 1 : 0;
    const Vec U_next = res.decision.head(m * N);
    Horizon next = linearize(model, x_k, U_next, N);
    double change = 0.0;
    for (int i = 0; i <= N; ++i) change += (next.states[i] - hz.states[i]).norm();
    dec.state_changes.push_back(change);
    U = U_next;
    hz = std::move(next);

    Y = settings.anderson_depth > 0 ? mixer.next(Y, U_next) : U_next;
    if (streak >= settings.infeasible_streak) {
      dec.status = DecisionStatus::Infeasible;
      dec.infeasible_iteration = j;
      dec.diagnostic = "filter: persistent positive slack";
      break;
    }
    if (change <= settings.eps) {
      dec.stop_criterion_met = true;
      break;
    }
  }

  U = clamp_inputs(U, cfg, N);
  dec.planned_inputs = unstack(U, m, N);
  dec.predicted_states = rollout(model, x_k, dec.planned_inputs);
  dec.applied_input = dec.planned_inputs.front();
  dec.margins = plan_margins(model, x_k, dec.planned_inputs, obstacles, barrier_cfg);
  dec.objective = 0.5 * U.dot(H * U) + g.dot(U) + c;
  if (dec.infeasible_iteration < 0) {
    const bool ok = min_of(dec.margins) >= -1e-6;
    dec.status = ok ? DecisionStatus::Feasible : DecisionStatus::Infeasible;
    if (!ok) dec.diagnostic = "filter: final margin below tolerance";
  }
  dec.solve_time = seconds_since(start);
  return dec;
}

ControlDecision sequential_step(const Vec& x_k, int k, const std::vector<TrackedObstacle>& obstacles,
                                const MpcConfig& cfg, const BarrierConfig& barrier_cfg,
                                const RobotModel& model, const FilterSettings& settings,
                                const std::optional<std::vector<Vec>>& warm_start) {
  const auto start = Clock::now();
  ControlDecision nominal = nominal_mpc(x_k, k, cfg, model, warm_start);
  if (!nominal.feasible()) {
    nominal.stage = "nominal";
    nominal.solve_time = seconds_since(start);
    return nominal;
  }
  ControlDecision dec =
      safety_filter(nominal, x_k, k, obstacles, cfg, barrier_cfg, model, settings, warm_start);
  dec.inner_iterations += nominal.inner_iterations;
  if (dec.feasible()) dec.stage = "sequential";
  dec.solve_time = seconds_since(start);
  return dec;
}

}  // namespace scbf
