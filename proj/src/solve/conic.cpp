#include "scbf/solve/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace scbf {

namespace {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard-form cone data: s = h - G z with s in R_+^l x Q^{q_1} x ... x Q^{q_J}.
// The orthant part is split into single-variable bound rows (kept implicit)
// and dense linear rows.
struct ConeData {
  int n = 0;
  std::vector<int> bound_index;
  std::vector<double> bound_sign;  // s = rhs - sign * z[index]
  Vec bound_rhs;
  Mat G_lin;
  Vec h_lin;
  std::vector<Mat> G_soc;            // restricted to soc_cols[j]
  std::vector<std::vector<int>> soc_cols;
  std::vector<Vec> h_soc;
  std::vector<int> soc_offset;

  int num_bounds() const { return static_cast<int>(bound_index.size()); }
  int num_linear() const { return static_cast<int>(h_lin.size()); }
  int num_orthant() const { return num_bounds() + num_linear(); }
  int num_rows() const {
    int rows = num_orthant();
    for (const Vec& h : h_soc) rows += static_cast<int>(h.size());
    return rows;
  }
  int degree() const { return num_orthant() + static_cast<int>(h_soc.size()); }

  Vec h_full() const {
    Vec h(num_rows());
    h.head(num_bounds()) = bound_rhs;
    h.segment(num_bounds(), num_linear()) = h_lin;
    for (size_t j = 0; j < h_soc.size(); ++j) h.segment(soc_offset[j], h_soc[j].size()) = h_soc[j];
    return h;
  }

  Vec G_times(const Vec& z) const {
    Vec out(num_rows());
    for (int i = 0; i < num_bounds(); ++i) out[i] = bound_sign[i] * z[bound_index[i]];
    if (num_linear() > 0) out.segment(num_bounds(), num_linear()).noalias() = G_lin * z;
    for (size_t j = 0; j < G_soc.size(); ++j) {
      out.segment(soc_offset[j], G_soc[j].rows()).noalias() = G_soc[j] * z(soc_cols[j]);
    }
    return out;
  }

  Vec GT_times(const Vec& y) const {
    Vec out = Vec::Zero(n);
    for (int i = 0; i < num_bounds(); ++i) out[bound_index[i]] += bound_sign[i] * y[i];
    if (num_linear() > 0) out.noalias() += G_lin.transpose() * y.segment(num_bounds(), num_linear());
    for (size_t j = 0; j < G_soc.size(); ++j) {
      out(soc_cols[j]) += G_soc[j].transpose() * y.segment(soc_offset[j], G_soc[j].rows());
    }
    return out;
  }
};

ConeData build_cones(const ConicProblem& prob) {
  ConeData cones;
  cones.n = prob.dim();
  const int n = cones.n;
  std::vector<double> rhs;
  for (int i = 0; i < n; ++i) {
    if (prob.lower.size() > 0 && std::isfinite(prob.lower[i])) {
      cones.bound_index.push_back(i);
      cones.bound_sign.push_back(-1.0);
      rhs.push_back(-prob.lower[i]);
    }
    if (prob.upper.size() > 0 && std::isfinite(prob.upper[i])) {
      cones.bound_index.push_back(i);
      cones.bound_sign.push_back(1.0);
      rhs.push_back(prob.upper[i]);
    }
  }
  cones.bound_rhs = Eigen::Map<Vec>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));

  // SOC constraints whose norm part is constant become linear rows.
  std::vector<const SocConstraint*> cones_kept;
  std::vector<Eigen::RowVectorXd> extra_rows;
  std::vector<double> extra_rhs;
  for (const SocConstraint& soc : prob.soc_constraints) {
    const bool constant_norm = soc.A.rows() == 0 || soc.A.isZero(0.0);
    if (constant_norm) {
      const double bnorm = soc.A.rows() == 0 ? 0.0 : soc.b.norm();
      extra_rows.push_back(-soc.c.transpose());
      extra_rhs.push_back(soc.e - bnorm);
    } else {
      cones_kept.push_back(&soc);
    }
  }
  for (Eigen::Index r = 0; r < prob.h.size(); ++r) {
    extra_rows.push_back(prob.G.row(r));
    extra_rhs.push_back(prob.h[r]);
  }
  // Rows that hold everywhere on the bound box can never be active.
  std::vector<int> keep;
  for (size_t r = 0; r < extra_rows.size(); ++r) {
    double worst = 0.0;
    for (int i = 0; i < n && std::isfinite(worst); ++i) {
      const double g = extra_rows[r][i];
      if (g > 0.0) {
        worst += prob.upper.size() > 0 ? g * prob.upper[i] : kInf;
      } else if (g < 0.0) {
        worst += prob.lower.size() > 0 ? g * prob.lower[i] : kInf;
      }
    }
    if (!(worst <= extra_rhs[r])) keep.push_back(static_cast<int>(r));
  }
  const int lin = static_cast<int>(keep.size());
  cones.G_lin.resize(lin, n);
  cones.h_lin.resize(lin);
  for (int r = 0; r < lin; ++r) {
    cones.G_lin.row(r) = extra_rows[keep[r]];
    cones.h_lin[r] = extra_rhs[keep[r]];
  }

  int offset = cones.num_orthant();
  for (const SocConstraint* soc : cones_kept) {
    const auto rows = soc->A.rows() + 1;
    Mat G(rows, n);
    G.row(0) = -soc->c.transpose();
    G.bottomRows(rows - 1) = -soc->A;
    Vec h(rows);
    h[0] = soc->e;
    h.tail(rows - 1) = soc->b;
    std::vector<int> cols;
    for (int i = 0; i < n; ++i) {
      if (!G.col(i).isZero(0.0)) cols.push_back(i);
    }
    cones.G_soc.push_back(G(Eigen::all, cols));
    cones.soc_cols.push_back(std::move(cols));
    cones.h_soc.push_back(std::move(h));
    cones.soc_offset.push_back(offset);
    offset += static_cast<int>(rows);
  }
  return cones;
}

// Nesterov-Todd scaling: W z = W^{-1} s = lambda, W symmetric.
struct Scaling {
  Vec orthant_w;  // sqrt(s / z)
  std::vector<double> eta;
  std::vector<double> a;
  std::vector<Vec> qv;
  Vec lambda;
};

double soc_jnorm(const Eigen::Ref<const Vec>& u) {
  return std::sqrt(std::max(0.0, (u[0] - u.tail(u.size() - 1).norm()) *
                                     (u[0] + u.tail(u.size() - 1).norm())));
}

Scaling compute_scaling(const ConeData& cones, const Vec& s, const Vec& z) {
  Scaling sc;
  const int l = cones.num_orthant();
  sc.orthant_w = (s.head(l).array() / z.head(l).array()).sqrt();
  sc.lambda.resize(s.size());
  sc.lambda.head(l) = (s.head(l).array() * z.head(l).array()).sqrt();
  for (size_t j = 0; j < cones.h_soc.size(); ++j) {
    const int off = cones.soc_offset[j];
    const int dim = static_cast<int>(cones.h_soc[j].size());
    const Vec sb = s.segment(off, dim);
    const Vec zb = z.segment(off, dim);
    const double sn = soc_jnorm(sb);
    const double zn = soc_jnorm(zb);
    const Vec sbar = sb / sn;
    const Vec zbar = zb / zn;
    const double gam = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
    Vec wbar(dim);
    wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gam);
    wbar.tail(dim - 1) = (sbar.tail(dim - 1) - zbar.tail(dim - 1)) / (2.0 * gam);
    const double eta = std::sqrt(sn / zn);
    sc.eta.push_back(eta);
    sc.a.push_back(wbar[0]);
    sc.qv.push_back(wbar.tail(dim - 1));
    // lambda = W z
    const double a = wbar[0];
    const Vec& qb = sc.qv.back();
    const double qz = qb.dot(zb.tail(dim - 1));
    sc.lambda[off] = eta * (a * zb[0] + qz);
    sc.lambda.segment(off + 1, dim - 1) =
        eta * (qb * zb[0] + zb.tail(dim - 1) + qb * (qz / (1.0 + a)));
  }
  return sc;
}

// y = W v (inverse = false) or y = W^{-1} v (inverse = true).
Vec apply_scaling(const ConeData& cones, const Scaling& sc, const Vec& v, bool inverse) {
  Vec y(v.size());
  const int l = cones.num_orthant();
  if (inverse) {
    y.head(l) = v.head(l).array() / sc.orthant_w.array();
  } else {
    y.head(l) = v.head(l).array() * sc.orthant_w.array();
  }
  for (size_t j = 0; j < cones.h_soc.size(); ++j) {
    const int off = cones.soc_offset[j];
    const int dim = static_cast<int>(cones.h_soc[j].size());
    const double a = sc.a[j];
    const Vec& qb = sc.qv[j];
    const double v0 = v[off];
    const auto v1 = v.segment(off + 1, dim - 1);
    const double qv1 = qb.dot(v1);
    const double sign = inverse ? -1.0 : 1.0;
    const double scale = inverse ? 1.0 / sc.eta[j] : sc.eta[j];
    y[off] = scale * (a * v0 + sign * qv1);
    y.segment(off + 1, dim - 1) = scale * (sign * qb * v0 + v1 + qb * (qv1 / (1.0 + a)));
  }
  return y;
}

// Rows of W^{-1} G for one SOC block, written into out.
void scale_soc_rows_inverse(const Mat& G, double eta, double a, const Vec& qb, Mat& out) {
  const auto dim = G.rows();
  out.resize(dim, G.cols());
  const Eigen::RowVectorXd g0 = G.row(0);
  const Eigen::RowVectorXd qG1 = qb.transpose() * G.bottomRows(dim - 1);
  out.row(0) = (a * g0 - qG1) / eta;
  out.bottomRows(dim - 1) = G.bottomRows(dim - 1);
  out.bottomRows(dim - 1).noalias() += qb * ((qG1 / (1.0 + a)) - g0);
  out.bottomRows(dim - 1) /= eta;
}

// Jordan product u o v.
Vec jordan_product(const ConeData& cones, const Vec& u, const Vec& v) {
  Vec out(u.size());
  const int l = cones.num_orthant();
  out.head(l) = u.head(l).array() * v.head(l).array();
  for (size_t j = 0; j < cones.h_soc.size(); ++j) {
    const int off = cones.soc_offset[j];
    const int dim = static_cast<int>(cones.h_soc[j].size());
    out[off] = u.segment(off, dim).dot(v.segment(off, dim));
    out.segment(off + 1, dim - 1) =
        u[off] * v.segment(off + 1, dim - 1) + v[off] * u.segment(off + 1, dim - 1);
  }
  return out;
}

// Solves lambda o t = r for t.
Vec jordan_divide(const ConeData& cones, const Vec& lambda, const Vec& r) {
  Vec t(r.size());
  const int l = cones.num_orthant();
  t.head(l) = r.head(l).array() / lambda.head(l).array();
  for (size_t j = 0; j < cones.h_soc.size(); ++j) {
    const int off = cones.soc_offset[j];
    const int dim = static_cast<int>(cones.h_soc[j].size());
    const double l0 = lambda[off];
    const auto l1 = lambda.segment(off + 1, dim - 1);
    const double det = l0 * l0 - l1.squaredNorm();
    const double t0 = (l0 * r[off] - l1.dot(r.segment(off + 1, dim - 1))) / det;
    t[off] = t0;
    t.segment(off + 1, dim - 1) = (r.segment(off + 1, dim - 1) - l1 * t0) / l0;
  }
  return t;
}

Vec identity_element(const ConeData& cones) {
  Vec e = Vec::Zero(cones.num_rows());
  e.head(cones.num_orthant()).setOnes();
  for (int off : cones.soc_offset) e[off] = 1.0;
  return e;
}

// Smallest eigenvalue over all blocks (u in int K iff > 0).
double min_eigenvalue(const ConeData& cones, const Vec& u) {
  double m = kInf;
  const int l = cones.num_orthant();
  if (l > 0) m = u.head(l).minCoeff();
  for (size_t j = 0; j < cones.h_soc.size(); ++j) {
    const int off = cones.soc_offset[j];
    const int dim = static_cast<int>(cones.h_soc[j].size());
    m = std::min(m, u[off] - u.segment(off + 1, dim - 1).norm());
  }
  return m;
}

// Largest alpha with u + alpha du in K, for u in int K (may be +inf).
double max_step(const ConeData& cones, const Vec& u, const Vec& du) {
  double alpha = kInf;
  const int l = cones.num_orthant();
  for (int i = 0; i < l; ++i) {
    if (du[i] < 0.0) alpha = std::min(alpha, -u[i] / du[i]);
  }
  for (size_t j = 0; j < cones.h_soc.size(); ++j) {
    const int off = cones.soc_offset[j];
    const int dim = static_cast<int>(cones.h_soc[j].size());
    const auto ub = u.segment(off, dim);
    const auto db = du.segment(off, dim);
    const double un = soc_jnorm(ub);
    if (un <= 0.0) return 0.0;
    const Vec ubar = ub / un;
    const double ubar_J_d = ubar[0] * db[0] - ubar.tail(dim - 1).dot(db.tail(dim - 1));
    const double rho0 = ubar_J_d / un;
    const double factor = (ubar_J_d + db[0]) / (ubar[0] + 1.0);
    const Vec rho1 = (db.tail(dim - 1) - factor * ubar.tail(dim - 1)) / un;
    const double denom = rho1.norm() - rho0;
    if (denom > 0.0) alpha = std::min(alpha, 1.0 / denom);
  }
  return alpha;
}

struct Factorization {
  Eigen::LLT<Mat> llt;
  Mat soc_rows;
};

// Cholesky of P + G^T W^{-2} G, with a small diagonal shift on failure.
bool factor_kkt(const ConicProblem& prob, const ConeData& cones, const Scaling& sc, Factorization& f,
                Mat& work) {
  const int n = cones.n;
  Mat M = prob.P;
  for (int i = 0; i < cones.num_bounds(); ++i) {
    const double w = sc.orthant_w[i];
    M(cones.bound_index[i], cones.bound_index[i]) += 1.0 / (w * w);
  }
  if (cones.num_linear() > 0) {
    const Vec inv_w = sc.orthant_w.segment(cones.num_bounds(), cones.num_linear()).cwiseInverse();
    work.noalias() = inv_w.asDiagonal() * cones.G_lin;
    M.selfadjointView<Eigen::Lower>().rankUpdate(work.transpose());
  }
  // Cone blocks only touch a few columns; accumulate on those.
  Mat block;
  Mat gram;
  for (size_t j = 0; j < cones.G_soc.size(); ++j) {
    scale_soc_rows_inverse(cones.G_soc[j], sc.eta[j], sc.a[j], sc.qv[j], block);
    gram.noalias() = block.transpose() * block;
    const std::vector<int>& cols = cones.soc_cols[j];
    for (size_t b = 0; b < cols.size(); ++b) {
      for (size_t a = b; a < cols.size(); ++a) {
        const int r = std::max(cols[a], cols[b]);
        const int c = std::min(cols[a], cols[b]);
        M(r, c) += gram(a, b);
      }
    }
  }
  M.triangularView<Eigen::StrictlyUpper>() = M.transpose();
  f.llt.compute(M);
  double shift = 1e-12 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
  for (int attempt = 0; attempt < 8 && f.llt.info() != Eigen::Success; ++attempt) {
    f.llt.compute(M + shift * Mat::Identity(n, n));
    shift *= 100.0;
  }
  return f.llt.info() == Eigen::Success;
}

struct Direction {
  Vec dx;
  Vec ds;
  Vec dz;
};

// Solves  P dx + G^T dz = -rx,  G dx + ds = -rz,  lambda o (W dz + W^{-1} ds) = rc
// given t = lambda \ rc.
Direction solve_newton(const ConicProblem& prob, const ConeData& cones, const Scaling& sc,
                       const Factorization& f, const Vec& rx, const Vec& rz, const Vec& t) {
  (void)prob;
  Direction d;
  const Vec winv_rz = apply_scaling(cones, sc, rz, true);
  const Vec y = apply_scaling(cones, sc, winv_rz + t, true);
  d.dx = f.llt.solve(-rx - cones.GT_times(y));
  const Vec gdx = cones.G_times(d.dx);
  d.dz = apply_scaling(cones, sc, apply_scaling(cones, sc, gdx + rz, true) + t, true);
  // From the linear equation, so the primal residual contracts exactly.
  d.ds = -rz - gdx;
  return d;
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "Optimal";
    case SolveStatus::Infeasible:
      return "Infeasible";
    case SolveStatus::IterationLimit:
      return "IterationLimit";
  }
  return "Unknown";
}

double ConicProblem::objective(const Eigen::VectorXd& z) const {
  return 0.5 * z.dot(P * z) + q.dot(z) + constant;
}

double ConicProblem::max_violation(const Eigen::VectorXd& z) const {
  double v = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (lower.size() > 0) v = std::max(v, lower[i] - z[i]);
    if (upper.size() > 0) v = std::max(v, z[i] - upper[i]);
  }
  if (h.size() > 0) v = std::max(v, (G * z - h).maxCoeff());
  for (const SocConstraint& soc : soc_constraints) v = std::max(v, -soc.residual(z));
  return v;
}

void ConicProblem::validate() const {
  const int n = dim();
  if (P.rows() != n || P.cols() != n) throw std::invalid_argument("conic: P must be n x n");
  if (lower.size() != 0 && lower.size() != n) throw std::invalid_argument("conic: lower size");
  if (upper.size() != 0 && upper.size() != n) throw std::invalid_argument("conic: upper size");
  if (lower.size() == n && upper.size() == n && (lower.array() > upper.array()).any()) {
    throw std::invalid_argument("conic: lower bound exceeds upper bound");
  }
  if (G.rows() != h.size() || (h.size() > 0 && G.cols() != n)) {
    throw std::invalid_argument("conic: G and h sizes disagree");
  }
  for (const SocConstraint& soc : soc_constraints) {
    if (soc.c.size() != n || soc.A.cols() != (soc.A.rows() > 0 ? n : soc.A.cols()) ||
        soc.A.rows() != soc.b.size()) {
      throw std::invalid_argument("conic: SOC constraint sizes disagree");
    }
  }
  if (n == 0) return;
  const double scale = 1.0 + P.cwiseAbs().maxCoeff();
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("conic: objective matrix must be symmetric");
  }
  Eigen::LDLT<Mat> ldlt(P);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -1e-9 * scale) {
    throw std::invalid_argument("conic: objective matrix must be positive semidefinite");
  }
}

SolveResult solve_conic(const ConicProblem& problem, const std::optional<Eigen::VectorXd>& warm_start,
                        const ConicSettings& settings) {
  problem.validate();
  const ConeData cones = build_cones(problem);
  const int n = cones.n;
  const Vec h = cones.h_full();
  const Vec e = identity_element(cones);
  const double degree = std::max(1, cones.degree());
  const double hnorm = std::max(1.0, h.norm());
  const double qnorm = std::max(1.0, problem.q.norm());

  SolveResult result;
  result.decision = Vec::Zero(n);

  if (cones.num_rows() == 0) {
    // Unconstrained: P z = -q.
    Eigen::LDLT<Mat> ldlt(problem.P);
    Vec z = ldlt.solve(-problem.q);
    if (!z.allFinite() || (problem.P * z + problem.q).norm() > 1e-8 * qnorm) {
      result.status = SolveStatus::Infeasible;  // unbounded below
      return result;
    }
    result.decision = z;
    result.status = SolveStatus::Optimal;
    result.objective_value = problem.objective(z);
    return result;
  }

  // Initial point from the KKT system with W = I.
  Vec x;
  Scaling unit;
  unit.orthant_w = Vec::Ones(cones.num_orthant());
  for (size_t j = 0; j < cones.h_soc.size(); ++j) {
    unit.eta.push_back(1.0);
    unit.a.push_back(1.0);
    unit.qv.push_back(Vec::Zero(cones.h_soc[j].size() - 1));
  }
  Factorization fact;
  Mat work;
  if (!factor_kkt(problem, cones, unit, fact, work)) {
    result.status = SolveStatus::IterationLimit;
    return result;
  }
  if (warm_start && warm_start->size() == n && warm_start->allFinite()) {
    x = *warm_start;
  } else {
    x = fact.llt.solve(-problem.q + cones.GT_times(h));
  }
  Vec s = h - cones.G_times(x);
  Vec z = -s;
  {
    const double ap = -min_eigenvalue(cones, s);
    if (ap >= -1e-8) s += (1.0 + ap) * e;
    const double ad = -min_eigenvalue(cones, z);
    if (ad >= -1e-8) z += (1.0 + ad) * e;
  }

  // Best iterate by the worst of its scaled residuals and gap.
  struct Snapshot {
    double score = kInf;
    Vec x, s, z;
  } best;

  for (int iter = 0; iter <= settings.max_iterations; ++iter) {
    result.iterations = iter;
    const Vec gx = cones.G_times(x);
    const Vec px = problem.P * x;
    const Vec gtz = cones.GT_times(z);
    const Vec rx = px + problem.q + gtz;
    const Vec rz = gx + s - h;
    const double gap = s.dot(z);
    const double mu = gap / degree;
    const double pcost = 0.5 * x.dot(px) + problem.q.dot(x);
    const double dcost = pcost + z.dot(rz) - gap;
    const double pres = rz.norm() / hnorm;
    const double dres = rx.norm() / qnorm;
    double relgap = kInf;
    if (pcost < 0.0) {
      relgap = gap / -pcost;
    } else if (dcost > 0.0) {
      relgap = gap / dcost;
    }

    if (pres <= settings.feasibility_tol && dres <= settings.feasibility_tol &&
        (gap <= settings.absolute_gap_tol || relgap <= settings.relative_gap_tol)) {
      result.status = SolveStatus::Optimal;
      break;
    }
    const double score = std::max({pres, dres, std::min(gap, relgap)});
    if (score < best.score) best = {score, x, s, z};

    // Farkas certificate: z in K*, G^T z ~ 0, h^T z < 0.
    const double hz = h.dot(z);
    if (hz < 0.0 && gtz.norm() <= 1e-9 * -hz && pres > settings.feasibility_tol) {
      result.status = SolveStatus::Infeasible;
      break;
    }
    if (iter == settings.max_iterations) {
      result.status = SolveStatus::IterationLimit;
      break;
    }

    const Scaling sc = compute_scaling(cones, s, z);
    if (!factor_kkt(problem, cones, sc, fact, work)) {
      result.status = SolveStatus::IterationLimit;
      break;
    }

    // Predictor.
    const Vec t_aff = -sc.lambda;
    const Direction aff = solve_newton(problem, cones, sc, fact, rx, rz, t_aff);
    const double alpha_aff =
        std::min({1.0, max_step(cones, s, aff.ds), max_step(cones, z, aff.dz)});
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3.0), 0.0, 1.0);

    // Corrector.
    const Vec ds_scaled = apply_scaling(cones, sc, aff.ds, true);
    const Vec dz_scaled = apply_scaling(cones, sc, aff.dz, false);
    const Vec rc = -jordan_product(cones, sc.lambda, sc.lambda) -
                   jordan_product(cones, ds_scaled, dz_scaled) + sigma * mu * e;
    const Vec t = jordan_divide(cones, sc.lambda, rc);
    const Direction dir = solve_newton(problem, cones, sc, fact, rx, rz, t);
    const double alpha_max = std::min(max_step(cones, s, dir.ds), max_step(cones, z, dir.dz));
    const double alpha = std::min(1.0, settings.step_fraction * alpha_max);
    if (!(alpha > 1e-12) || !dir.dx.allFinite() || !dir.dz.allFinite()) {
      result.status = SolveStatus::IterationLimit;
      break;
    }
    x += alpha * dir.dx;
    s += alpha * dir.ds;
    z += alpha * dir.dz;
  }

  if (result.status == SolveStatus::IterationLimit && best.score <= settings.reduced_tol) {
    x = best.x;
    s = best.s;
    z = best.z;
    result.status = SolveStatus::Optimal;
  }

  result.decision = x;
  result.objective_value = problem.objective(x);
  result.max_violation = problem.max_violation(x);
  const Vec rx = problem.P * x + problem.q + cones.GT_times(z);
  result.kkt_residual = rx.norm() / qnorm;
  result.duality_gap = s.dot(z);
  if (result.status == SolveStatus::Optimal && (result.max_violation > 1e-6 || result.kkt_residual > 1e-6)) {
    result.status = SolveStatus::IterationLimit;
  }
  return result;
}

}  // namespace scbf
