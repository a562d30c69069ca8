#include "ehnode/mdp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "ehnode/errors.hpp"

namespace ehnode {

namespace {

std::vector<double> level_pmf(const DistributionSpec& spec, double step, const char* what) {
  if (!spec.is_discrete())
    throw ConfigError(std::string(what) + ": " + spec.name() +
                      " is continuous; the MDP needs a discrete distribution");
  const DiscretePmf pmf = spec.as_pmf();
  std::vector<double> out;
  for (std::size_t i = 0; i < pmf.values.size(); ++i) {
    const double levels = pmf.values[i] / step;
    const double rounded = std::round(levels);
    if (std::abs(levels - rounded) > 1e-9 * std::max(1.0, levels))
      throw ConfigError(std::string(what) + ": support point is not a multiple of the grid step");
    const auto k = static_cast<std::size_t>(rounded);
    if (out.size() <= k) out.resize(k + 1, 0.0);
    out[k] += pmf.probs[i];
  }
  return out;
}

// W[qp][ep] = sum_x sum_y px py v[min(Q, qp + x)][min(E, ep + y)], computed
// as two one-dimensional passes.
class Continuation {
 public:
  explicit Continuation(const MdpModel& m)
      : m_(m), tmp_(static_cast<std::size_t>(m.states())), w_(tmp_.size()) {}

  const std::vector<double>& operator()(const std::vector<double>& v) {
    const int nq = m_.n_q(), ne = m_.n_e();
    const auto& px = m_.arrival_pmf();
    const auto& py = m_.harvest_pmf();
    for (int q = 0; q < nq; ++q) {
      const double* row = &v[static_cast<std::size_t>(q * ne)];
      double* out = &tmp_[static_cast<std::size_t>(q * ne)];
      for (int e = 0; e < ne; ++e) {
        double s = 0.0;
        for (std::size_t y = 0; y < py.size(); ++y)
          s += py[y] * row[std::min(ne - 1, e + static_cast<int>(y))];
        out[e] = s;
      }
    }
    for (int q = 0; q < nq; ++q) {
      double* out = &w_[static_cast<std::size_t>(q * ne)];
      std::fill(out, out + ne, 0.0);
      for (std::size_t x = 0; x < px.size(); ++x) {
        const double p = px[x];
        if (p == 0.0) continue;
        const double* src = &tmp_[static_cast<std::size_t>(
            std::min(nq - 1, q + static_cast<int>(x)) * ne)];
        for (int e = 0; e < ne; ++e) out[e] += p * src[e];
      }
    }
    return w_;
  }

 private:
  const MdpModel& m_;
  std::vector<double> tmp_, w_;
};

// One Bellman sweep: out[s] = min_a stage_cost + alpha W[post][e - a].
// When `actions` is non-null, also records the smallest near-minimizing action.
void bellman(const MdpModel& m, const std::vector<double>& w, double alpha,
             std::vector<double>& out, std::vector<int>* actions, double tie_tol) {
  const int nq = m.n_q(), ne = m.n_e();
  for (int q = 0; q < nq; ++q) {
    for (int e = 0; e < ne; ++e) {
      double best = std::numeric_limits<double>::infinity();
      for (int a = 0; a <= e; ++a) {
        const int qp = m.post_level(q, a);
        const double val =
            m.stage_cost(q, a) + alpha * w[static_cast<std::size_t>(qp * ne + e - a)];
        best = std::min(best, val);
      }
      const auto s = static_cast<std::size_t>(m.index(q, e));
      out[s] = best;
      if (actions) {
        const double slack = tie_tol * std::max(1.0, std::abs(best));
        for (int a = 0; a <= e; ++a) {
          const int qp = m.post_level(q, a);
          const double val =
              m.stage_cost(q, a) + alpha * w[static_cast<std::size_t>(qp * ne + e - a)];
          if (val <= best + slack) {
            (*actions)[s] = a;
            break;
          }
        }
      }
    }
  }
}

PolicyTable empty_table(const MdpModel& m, double alpha) {
  PolicyTable t;
  t.n_q = m.n_q();
  t.n_e = m.n_e();
  t.q_step = m.grid().q_step;
  t.e_step = m.grid().e_step;
  t.alpha = alpha;
  t.action.assign(static_cast<std::size_t>(m.states()), 0);
  t.value.assign(static_cast<std::size_t>(m.states()), 0.0);
  return t;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

AverageCostResult relative_vi(const MdpModel& m, const SolverOptions& opt) {
  constexpr double kDamping = 0.5;  // aperiodicity transform
  AverageCostResult res;
  res.table = empty_table(m, 1.0);
  const auto n = static_cast<std::size_t>(m.states());
  std::vector<double> v(n, 0.0), tv(n);
  Continuation cont(m);
  double lo = 0.0, hi = 0.0;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    bellman(m, cont(v), 1.0, tv, nullptr, 0.0);
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (std::size_t s = 0; s < n; ++s) {
      const double d = tv[s] - v[s];
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    res.table.residuals.push_back(hi - lo);
    if (hi - lo < opt.tol) break;
    for (std::size_t s = 0; s < n; ++s) v[s] += kDamping * (tv[s] - v[s]);
    const double ref = v[0];
    for (double& x : v) x -= ref;
  }
  res.table.iterations = it + 1;
  if (it == opt.max_iterations) res.status = SolveStatus::NotConverged;
  res.gain = 0.5 * (lo + hi);
  bellman(m, cont(v), 1.0, tv, &res.table.action, opt.tie_tol);
  res.table.value = v;
  res.table.gain = res.gain;
  return res;
}

AverageCostResult policy_iteration(const MdpModel& m, const SolverOptions& opt) {
  AverageCostResult res;
  res.table = empty_table(m, 1.0);
  const int nq = m.n_q(), ne = m.n_e();
  const int n = m.states();
  constexpr int kRef = 0;

  std::vector<int> policy(static_cast<std::size_t>(n));
  for (int q = 0; q < nq; ++q)
    for (int e = 0; e < ne; ++e) policy[static_cast<std::size_t>(m.index(q, e))] = e;

  std::vector<double> h(static_cast<std::size_t>(n), 0.0);
  Continuation cont(m);
  double gain = 0.0;
  for (int it = 0; it < std::min(opt.max_iterations, 1000); ++it) {
    // Evaluate: g + h(s) - sum_s' P(s, s') h(s') = c(s), with h(ref) = 0 and
    // the ref column carrying g.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 12);
    Eigen::VectorXd rhs(n);
    for (int q = 0; q < nq; ++q) {
      for (int e = 0; e < ne; ++e) {
        const int s = m.index(q, e);
        const int a = policy[static_cast<std::size_t>(s)];
        rhs[s] = m.stage_cost(q, a);
        trip.emplace_back(s, kRef, 1.0);
        if (s != kRef) trip.emplace_back(s, s, 1.0);
        for (const auto& [t, p] : m.transition_row(q, e, a))
          if (t != kRef) trip.emplace_back(s, t, -p);
      }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) {
      res.status = SolveStatus::Multichain;
      return res;
    }
    Eigen::VectorXd z = lu.solve(rhs);
    const double resid = (A * z - rhs).cwiseAbs().maxCoeff();
    if (lu.info() != Eigen::Success || !z.allFinite() ||
        resid > 1e-6 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
      res.status = SolveStatus::Multichain;
      return res;
    }
    gain = z[kRef];
    for (int s = 0; s < n; ++s) h[static_cast<std::size_t>(s)] = s == kRef ? 0.0 : z[s];

    // Improve: switch only on a strict improvement, so the loop terminates.
    const auto& w = cont(h);
    bool changed = false;
    double change = 0.0;
    for (int q = 0; q < nq; ++q) {
      for (int e = 0; e < ne; ++e) {
        const auto s = static_cast<std::size_t>(m.index(q, e));
        auto qval = [&](int a) {
          return m.stage_cost(q, a) +
                 w[static_cast<std::size_t>(m.post_level(q, a) * ne + e - a)];
        };
        const double current = qval(policy[s]);
        double best = current;
        int best_a = policy[s];
        for (int a = 0; a <= e; ++a) {
          const double val = qval(a);
          if (val < best) {
            best = val;
            best_a = a;
          }
        }
        const double slack = opt.tie_tol * std::max(1.0, std::abs(current));
        if (best < current - slack) {
          policy[s] = best_a;
          changed = true;
          change = std::max(change, current - best);
        }
      }
    }
    res.table.residuals.push_back(change);
    res.table.iterations = it + 1;
    if (!changed) break;
    if (it + 1 == std::min(opt.max_iterations, 1000)) res.status = SolveStatus::NotConverged;
  }

  res.gain = gain;
  res.table.gain = gain;
  res.table.value = h;
  std::vector<double> scratch(static_cast<std::size_t>(n));
  bellman(m, cont(h), 1.0, scratch, &res.table.action, opt.tie_tol);
  return res;
}

}  // namespace

MdpModel::MdpModel(const MdpGrid& grid, std::vector<double> arrival_pmf,
                   std::vector<double> harvest_pmf, RateFunction rf)
    : grid_(grid), px_(std::move(arrival_pmf)), py_(std::move(harvest_pmf)), rf_(rf) {
  if (grid_.n_q < 1 || grid_.n_e < 1)
    throw ConfigError("mdp: grid sizes must be positive");
  if (!(grid_.q_step > 0.0) || !(grid_.e_step > 0.0))
    throw ConfigError("mdp: grid steps must be positive");
  if (!(grid_.overflow_penalty >= 0.0))
    throw ConfigError("mdp: overflow_penalty must be >= 0");
  if (px_.empty() || py_.empty()) throw ConfigError("mdp: empty arrival or harvest pmf");

  const int nq = grid_.n_q, ne = grid_.n_e;
  post_.resize(static_cast<std::size_t>(nq * ne));
  for (int q = 0; q < nq; ++q) {
    for (int a = 0; a < ne; ++a) {
      const double served = rf_(a * grid_.e_step);
      const double rest = std::max(q * grid_.q_step - served, 0.0);
      const int level = static_cast<int>(std::floor(rest / grid_.q_step + 0.5));
      post_[static_cast<std::size_t>(q * ne + a)] = std::clamp(level, 0, q);
    }
  }
  drop_.assign(static_cast<std::size_t>(nq), 0.0);
  for (int qp = 0; qp < nq; ++qp)
    for (std::size_t x = 0; x < px_.size(); ++x)
      drop_[static_cast<std::size_t>(qp)] +=
          px_[x] * std::max(0, qp + static_cast<int>(x) - (nq - 1)) * grid_.q_step;
}

std::vector<std::pair<int, double>> MdpModel::transition_row(int q, int e, int action) const {
  if (action < 0 || action > e) throw std::out_of_range("transition_row: action > e");
  const int nq = grid_.n_q, ne = grid_.n_e;
  const int qp = post_level(q, action);
  const int ep = e - action;
  std::vector<std::pair<int, double>> row;
  for (std::size_t x = 0; x < px_.size(); ++x) {
    if (px_[x] == 0.0) continue;
    const int nq_level = std::min(nq - 1, qp + static_cast<int>(x));
    for (std::size_t y = 0; y < py_.size(); ++y) {
      if (py_[y] == 0.0) continue;
      const int t = index(nq_level, std::min(ne - 1, ep + static_cast<int>(y)));
      auto it = std::find_if(row.begin(), row.end(), [t](const auto& r) { return r.first == t; });
      if (it == row.end())
        row.emplace_back(t, px_[x] * py_[y]);
      else
        it->second += px_[x] * py_[y];
    }
  }
  return row;
}

int MdpModel::greedy_action(int q, int e) const {
  const double need = g_inverse(rf_, q * grid_.q_step) / grid_.e_step;
  if (!std::isfinite(need) || need >= e) return e;
  return std::min(e, static_cast<int>(std::floor(need + 0.5)));
}

MdpModel build_model(const MdpGrid& grid, const DistributionSpec& arrival,
                     const DistributionSpec& harvest, const RateFunction& rf) {
  return MdpModel(grid, level_pmf(arrival, grid.q_step, "arrival"),
                  level_pmf(harvest, grid.e_step, "harvest"), rf);
}

double table_action(const PolicyTable& table, double q, double e) {
  const double ql = q / table.q_step;
  const double el = e / table.e_step;
  const double q_top = table.n_q - 1, e_top = table.n_e - 1;
  if (!(ql >= 0.0) || !(el >= 0.0) || ql > q_top + 0.5 || el > e_top + 1e-9)
    throw std::domain_error("table_action: state outside the solved grid");
  const int qi = std::min(table.n_q - 1, static_cast<int>(std::floor(ql + 0.5)));
  const int ei = std::min(table.n_e - 1, static_cast<int>(std::floor(el + 1e-9)));
  const double t = table.action_at(qi, ei) * table.e_step;
  return std::min(t, e);
}

PolicyTable value_iterate(const MdpModel& model, double alpha, const SolverOptions& opt) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("value_iterate: alpha must lie in (0, 1)");
  PolicyTable table = empty_table(model, alpha);
  const auto n = static_cast<std::size_t>(model.states());
  std::vector<double> v(n, 0.0), next(n);
  Continuation cont(model);
  const double stop = opt.tol * (1.0 - alpha) / (2.0 * alpha);
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    bellman(model, cont(v), alpha, next, nullptr, 0.0);
    const double d = sup_diff(next, v);
    table.residuals.push_back(d);
    v.swap(next);
    if (d < stop) break;
  }
  table.iterations = it + 1;
  bellman(model, cont(v), alpha, next, &table.action, opt.tie_tol);
  table.value = v;
  return table;
}

AverageCostResult average_cost_solve(const MdpModel& model, AverageCostMethod method,
                                     const SolverOptions& opt) {
  return method == AverageCostMethod::PolicyIteration ? policy_iteration(model, opt)
                                                      : relative_vi(model, opt);
}

std::vector<double> stationary_distribution(const MdpModel& m, const PolicyTable& table,
                                            double tol, int max_iter) {
  const int nq = m.n_q(), ne = m.n_e();
  const auto n = static_cast<std::size_t>(m.states());
  const auto& px = m.arrival_pmf();
  const auto& py = m.harvest_pmf();
  std::vector<double> pi(n, 1.0 / static_cast<double>(n)), mass(n), tmp(n), next(n);
  for (int it = 0; it < max_iter; ++it) {
    std::fill(mass.begin(), mass.end(), 0.0);
    for (int q = 0; q < nq; ++q)
      for (int e = 0; e < ne; ++e) {
        const int a = table.action_at(q, e);
        mass[static_cast<std::size_t>(m.index(m.post_level(q, a), e - a))] +=
            pi[static_cast<std::size_t>(m.index(q, e))];
      }
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (int q = 0; q < nq; ++q)
      for (int e = 0; e < ne; ++e)
        for (std::size_t y = 0; y < py.size(); ++y)
          tmp[static_cast<std::size_t>(m.index(q, std::min(ne - 1, e + static_cast<int>(y))))] +=
              py[y] * mass[static_cast<std::size_t>(m.index(q, e))];
    std::fill(next.begin(), next.end(), 0.0);
    for (int q = 0; q < nq; ++q)
      for (std::size_t x = 0; x < px.size(); ++x)
        for (int e = 0; e < ne; ++e)
          next[static_cast<std::size_t>(m.index(std::min(nq - 1, q + static_cast<int>(x)), e))] +=
              px[x] * tmp[static_cast<std::size_t>(m.index(q, e))];
    double change = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const double lazy = 0.5 * (pi[s] + next[s]);
      change += std::abs(lazy - pi[s]);
      pi[s] = lazy;
    }
    if (change < tol) break;
  }
  return pi;
}

StructureReport structure_checks(const PolicyTable& vf, double tol) {
  StructureReport r;
  for (int q = 0; q < vf.n_q; ++q) {
    for (int e = 0; e < vf.n_e; ++e) {
      const double v = vf.value_at(q, e);
      const double slack = tol * std::max(1.0, std::abs(v));
      if (q + 1 < vf.n_q && vf.value_at(q + 1, e) < v - slack) r.q_violations.push_back({q, e});
      if (e + 1 < vf.n_e && vf.value_at(q, e + 1) > v + slack) r.e_violations.push_back({q, e});
    }
  }
  return r;
}

std::vector<VanishingDiscountPoint> vanishing_discount(const MdpModel& model,
                                                       const std::vector<double>& alphas,
                                                       double gain, const SolverOptions& opt) {
  std::vector<VanishingDiscountPoint> out;
  for (double a : alphas) {
    const PolicyTable t = value_iterate(model, a, opt);
    const double m = *std::min_element(t.value.begin(), t.value.end());
    const double scaled = (1.0 - a) * m;
    out.push_back({a, scaled, std::abs(scaled - gain) / std::max(std::abs(gain), 1e-300)});
  }
  return out;
}

std::vector<GridPoint> greedy_mismatches(const MdpModel& model, const PolicyTable& table) {
  std::vector<GridPoint> out;
  for (int q = 0; q < model.n_q(); ++q)
    for (int e = 0; e < model.n_e(); ++e)
      if (table.action_at(q, e) != model.greedy_action(q, e)) out.push_back({q, e});
  return out;
}

double boundary_occupancy(const MdpModel& model, const PolicyTable& table, double fraction) {
  const auto pi = stationary_distribution(model, table);
  const double cut = (1.0 - fraction) * (model.n_q() - 1);
  double mass = 0.0;
  for (int q = 0; q < model.n_q(); ++q)
    if (q >= cut)
      for (int e = 0; e < model.n_e(); ++e) mass += pi[static_cast<std::size_t>(model.index(q, e))];
  return mass;
}

void write_policy_table_csv(std::ostream& out, const PolicyTable& table) {
  out << "q_level,e_level,action,value\n";
  char buf[64];
  for (int q = 0; q < table.n_q; ++q) {
    for (int e = 0; e < table.n_e; ++e) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, table.value_at(q, e));
      out << q << ',' << e << ',' << table.action_at(q, e) << ','
          << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\n';
    }
  }
}

}  // namespace ehnode
