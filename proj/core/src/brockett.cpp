#include "certbound/brockett.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace certbound {

namespace {
constexpr double kPi = 3.14159265358979323846;

ControlProblem make_brockett(double state_radius, Horizon horizon) {
  if (state_radius < 1.0)
    throw std::invalid_argument("brockett_problem: state_radius must be >= 1");
  VariableSet xs({"x1", "x2", "x3"});
  VariableSet us({"u1", "u2"});
  VariableSet xu({"x1", "x2", "x3", "u1", "u2"});
  const Polynomial u1 = Polynomial::variable(xu, "u1");
  const Polynomial u2 = Polynomial::variable(xu, "u2");
  const Polynomial x1 = Polynomial::variable(xu, "x1");
  const Polynomial x2 = Polynomial::variable(xu, "x2");
  std::vector<Polynomial> f{u1, u2, u1 * x2 - u2 * x1};

  std::vector<std::pair<double, double>> xb(3, {-state_radius, state_radius});
  return make_control_problem(xs, us, std::move(f), Polynomial::constant(xu, 1.0),
                              Polynomial::zero(xs), box_set(xs, xb), ball_set(us, 1.0),
                              point_set(xs, {0.0, 0.0, 0.0}), horizon);
}

struct PcResult {
  double miss = 0.0;
  double max_inf = 0.0;
};

// Exact rollout of one piecewise-constant rotating control: within a
// segment x1, x2 move linearly and the x3 rate is constant, so each segment
// integrates in closed form.
PcResult propagate_pc(const std::vector<double>& x0, double a, double phi, double T, int N) {
  double x1 = x0[0], x2 = x0[1], x3 = x0[2];
  double max_inf = std::max({std::abs(x1), std::abs(x2), std::abs(x3)});
  const double dt = T / N;
  for (int k = 0; k < N; ++k) {
    const double th = a + phi * (k + 0.5) / N;
    const double c = std::cos(th), s = std::sin(th);
    x3 += dt * (c * x2 - s * x1);
    x1 += dt * c;
    x2 += dt * s;
    max_inf = std::max({max_inf, std::abs(x1), std::abs(x2), std::abs(x3)});
  }
  return {std::sqrt(x1 * x1 + x2 * x2 + x3 * x3), max_inf};
}

// RK4 rollout of the smooth control u(t) = (cos(a + phi t / T), sin(...)).
struct SmoothResult {
  double miss = 0.0;
  double max_inf = 0.0;
};

void rk4_step(double* x, double t, double dt, double a, double rate) {
  auto deriv = [&](const double* s, double tt, double* d) {
    const double th = a + rate * tt;
    const double u1 = std::cos(th), u2 = std::sin(th);
    d[0] = u1;
    d[1] = u2;
    d[2] = u1 * s[1] - u2 * s[0];
  };
  double k1[3], k2[3], k3[3], k4[3], tmp[3];
  deriv(x, t, k1);
  for (int i = 0; i < 3; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
  deriv(tmp, t + 0.5 * dt, k2);
  for (int i = 0; i < 3; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
  deriv(tmp, t + 0.5 * dt, k3);
  for (int i = 0; i < 3; ++i) tmp[i] = x[i] + dt * k3[i];
  deriv(tmp, t + dt, k4);
  for (int i = 0; i < 3; ++i) x[i] += dt / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
}

SmoothResult propagate_smooth(const std::vector<double>& x0, double a, double phi, double T,
                              int steps) {
  double x[3] = {x0[0], x0[1], x0[2]};
  double max_inf = std::max({std::abs(x[0]), std::abs(x[1]), std::abs(x[2])});
  const double rate = (T > 0) ? phi / T : 0.0;
  const double dt = T / steps;
  for (int k = 0; k < steps; ++k) {
    rk4_step(x, k * dt, dt, a, rate);
    max_inf = std::max({max_inf, std::abs(x[0]), std::abs(x[1]), std::abs(x[2])});
  }
  return {std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]), max_inf};
}

struct Candidate {
  double a = 0.0, phi = 0.0, T = 0.0;
  double J = 1e30, miss = 1e30;
};

// Deterministic compass pattern search on (a, phi, T).
template <typename Eval>
Candidate pattern_search(Candidate start, double step_a, double step_phi, double step_T,
                         double t_lo, Eval&& eval, int iters) {
  Candidate best = start;
  double sa = step_a, sp = step_phi, st = step_T;
  for (int it = 0; it < iters; ++it) {
    bool improved = false;
    for (int dim = 0; dim < 3; ++dim) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        Candidate c = best;
        if (dim == 0) c.a += sgn * sa;
        if (dim == 1) c.phi += sgn * sp;
        if (dim == 2) c.T = std::max(t_lo, c.T + sgn * st);
        eval(c);
        if (c.J < best.J) {
          best = c;
          improved = true;
        }
      }
    }
    if (!improved) {
      sa *= 0.55;
      sp *= 0.55;
      st *= 0.55;
      if (sa < 1e-9 && sp < 1e-9 && st < 1e-10) break;
    }
  }
  return best;
}

}  // namespace

ControlProblem brockett_problem(double state_radius) {
  return make_brockett(state_radius, Horizon::FreeTerminal);
}

ControlProblem brockett_fixed_horizon_problem(double state_radius) {
  return make_brockett(state_radius, Horizon::FixedUnit);
}

OracleResult oracle_min_time(const std::vector<double>& x0, const OracleConfig& cfg) {
  if (x0.size() != 3) throw std::invalid_argument("oracle_min_time: x0 must be 3-dimensional");
  OracleResult out;
  const double r0 = std::sqrt(x0[0] * x0[0] + x0[1] * x0[1] + x0[2] * x0[2]);
  if (r0 <= cfg.term_tol) {
    out.T = 0.0;
    out.terminal_miss = r0;
    out.trajectory.t0 = 0.0;
    out.trajectory.times = {0.0};
    out.trajectory.states = {x0};
    out.trajectory.controls = {{0.0, 0.0}};
    return out;
  }

  const double planar = std::hypot(x0[0], x0[1]);
  const double t_lo = std::max(1e-6, planar);
  const double t_hi =
      cfg.t_max > 0 ? cfg.t_max : planar + std::sqrt(2.0 * kPi * std::abs(x0[2])) + 1.0;

  const int N = cfg.segments;
  auto make_eval = [&](int segs, double rho) {
    return [&, segs, rho](Candidate& c) {
      const PcResult r = propagate_pc(x0, c.a, c.phi, c.T, segs);
      c.miss = r.miss;
      c.J = (r.max_inf > cfg.state_radius + 1e-9) ? 1e29 + r.miss : c.T + rho * r.miss;
    };
  };

  // Terminal state for a candidate under either rollout flavor.
  auto endpoint = [&](const Candidate& c, int segs, bool smooth) {
    Eigen::Vector3d e;
    if (smooth) {
      double x[3] = {x0[0], x0[1], x0[2]};
      const double rate = c.phi / c.T;
      const double dt = c.T / segs;
      for (int k = 0; k < segs; ++k) rk4_step(x, k * dt, dt, c.a, rate);
      e << x[0], x[1], x[2];
    } else {
      double x1 = x0[0], x2 = x0[1], x3 = x0[2];
      const double dt = c.T / segs;
      for (int k = 0; k < segs; ++k) {
        const double th = c.a + c.phi * (k + 0.5) / segs;
        const double cu = std::cos(th), su = std::sin(th);
        x3 += dt * (cu * x2 - su * x1);
        x1 += dt * cu;
        x2 += dt * su;
      }
      e << x1, x2, x3;
    }
    return e;
  };

  // Damped Newton shooting on (a, phi, T) -> x(T); quadratic convergence
  // inside a basin located by the grid stage.
  auto newton_polish = [&](Candidate c, int segs, bool smooth) {
    for (int it = 0; it < 40; ++it) {
      const Eigen::Vector3d F = endpoint(c, segs, smooth);
      if (F.norm() <= 1e-11) break;
      Eigen::Matrix3d Jm;
      const double ha = 1e-6, hp = 1e-6, ht = 1e-7;
      {
        Candidate cp = c, cm = c;
        cp.a += ha;
        cm.a -= ha;
        Jm.col(0) = (endpoint(cp, segs, smooth) - endpoint(cm, segs, smooth)) / (2 * ha);
      }
      {
        Candidate cp = c, cm = c;
        cp.phi += hp;
        cm.phi -= hp;
        Jm.col(1) = (endpoint(cp, segs, smooth) - endpoint(cm, segs, smooth)) / (2 * hp);
      }
      {
        Candidate cp = c, cm = c;
        cp.T += ht;
        cm.T = std::max(1e-9, cm.T - ht);
        Jm.col(2) = (endpoint(cp, segs, smooth) - endpoint(cm, segs, smooth)) / (cp.T - cm.T);
      }
      Eigen::Vector3d step = Jm.fullPivLu().solve(F);
      if (!step.allFinite()) break;
      double damp = 1.0;
      bool moved = false;
      for (int bt = 0; bt < 12; ++bt) {
        Candidate cn = c;
        cn.a -= damp * step(0);
        cn.phi -= damp * step(1);
        cn.T = std::max(1e-9, cn.T - damp * step(2));
        if (endpoint(cn, segs, smooth).norm() < F.norm()) {
          c = cn;
          moved = true;
          break;
        }
        damp *= 0.5;
      }
      if (!moved) break;
    }
    const PcResult chk =
        smooth ? PcResult{endpoint(c, segs, true).norm(),
                          propagate_smooth(x0, c.a, c.phi, c.T, segs).max_inf}
               : propagate_pc(x0, c.a, c.phi, c.T, segs);
    c.miss = chk.miss;
    c.J = (chk.max_inf > cfg.state_radius + 1e-9) ? 1e29 + chk.miss : c.T + 50.0 * chk.miss;
    return c;
  };

  // Stage 1: coarse grid over control phase, total sweep and duration.
  std::vector<Candidate> seeds;
  {
    auto eval = make_eval(N, 50.0);
    const int na = 20, nphi = 57, nt = 49;
    std::vector<Candidate> all;
    all.reserve(na * nphi * nt);
    for (int ia = 0; ia < na; ++ia)
      for (int ip = 0; ip < nphi; ++ip)
        for (int it = 0; it < nt; ++it) {
          Candidate c;
          c.a = 2.0 * kPi * ia / na;
          c.phi = -3.5 * kPi + 7.0 * kPi * ip / (nphi - 1);
          c.T = t_lo + (t_hi - t_lo) * it / (nt - 1);
          eval(c);
          all.push_back(c);
        }
    std::sort(all.begin(), all.end(), [](const Candidate& a, const Candidate& b) {
      return a.J < b.J;
    });
    for (const auto& c : all) {
      bool near_existing = false;
      for (const auto& s : seeds)
        if (std::abs(s.T - c.T) < 0.05 * (t_hi - t_lo) && std::abs(s.phi - c.phi) < 0.5 &&
            std::abs(std::remainder(s.a - c.a, 2.0 * kPi)) < 0.7)
          near_existing = true;
      if (!near_existing) seeds.push_back(c);
      if (seeds.size() >= 16) break;
    }
  }

  // Stage 2: shrink each basin (pattern search), then Newton shooting.
  auto polish = [&](Candidate c, int segs) {
    c = pattern_search(c, 2.0 * kPi / 40, 0.25, 0.03 * (t_hi - t_lo), t_lo, make_eval(segs, 50.0),
                       80);
    return newton_polish(c, segs, false);
  };

  Candidate best;
  for (auto s : seeds) {
    const Candidate c = polish(s, N);
    if ((c.miss <= cfg.term_tol && (best.miss > cfg.term_tol || c.T < best.T)) ||
        (best.miss > cfg.term_tol && c.miss < best.miss))
      best = c;
  }

  // Segment doubling for the reported convergence gap.
  const Candidate best2 = newton_polish(best, 2 * N, false);
  out.convergence_gap = std::abs(best.T - best2.T);
  Candidate chosen = (best2.miss <= cfg.term_tol && best2.T <= best.T) ? best2 : best;

  // Final refinement against the smooth rollout the trajectory will use.
  chosen = newton_polish(chosen, 2000, true);

  if (chosen.miss > cfg.term_tol) {
    std::ostringstream os;
    os << "oracle_min_time: no feasible trajectory found from (" << x0[0] << ", " << x0[1] << ", "
       << x0[2] << "); best terminal miss " << chosen.miss << " exceeds term_tol " << cfg.term_tol;
    throw std::runtime_error(os.str());
  }

  out.T = chosen.T;
  out.phase = chosen.a;
  out.sweep = chosen.phi;
  out.segments = 2 * N;
  out.terminal_miss = chosen.miss;

  // Resample the smooth rollout on a uniform grid (RK4 substeps between
  // samples keep the stored trapezoidal defect far below the step bound).
  const int M = std::max(8, cfg.resample_points);
  const int sub = std::max(20, 2000 / M + 1);
  const double rate = chosen.phi / chosen.T;
  Trajectory traj;
  traj.t0 = 0.0;
  double x[3] = {x0[0], x0[1], x0[2]};
  const double dt = chosen.T / (M - 1);
  for (int k = 0; k < M; ++k) {
    const double tk = k * dt;
    traj.times.push_back(tk);
    traj.states.push_back({x[0], x[1], x[2]});
    traj.controls.push_back({std::cos(chosen.a + rate * tk), std::sin(chosen.a + rate * tk)});
    if (k + 1 < M) {
      const double h = dt / sub;
      for (int s = 0; s < sub; ++s) rk4_step(x, tk + s * h, h, chosen.a, rate);
    }
  }
  out.trajectory = std::move(traj);
  return out;
}

std::vector<Trajectory> oracle_trajectories(const std::vector<std::vector<double>>& x0s,
                                            const OracleConfig& cfg) {
  std::vector<Trajectory> out(x0s.size());
  for (std::size_t i = 0; i < x0s.size(); ++i) out[i] = oracle_min_time(x0s[i], cfg).trajectory;
  return out;
}

std::vector<std::vector<double>> table1_states() {
  std::vector<std::vector<double>> pts;
  for (int x2 = 1; x2 <= 3; ++x2)
    for (int x3 = 1; x3 <= 3; ++x3) pts.push_back({1.0, double(x2), double(x3)});
  return pts;
}

std::vector<Table1Row> table1_harness(const Table1Config& cfg) {
  const auto states = table1_states();
  const ControlProblem prob = brockett_problem(cfg.state_radius);

  OracleConfig ocfg = cfg.oracle;
  ocfg.state_radius = cfg.state_radius;

  std::vector<double> oracle_T(states.size(), 0.0);
  {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= states.size()) return;
        oracle_T[i] = oracle_min_time(states[i], ocfg).T;
      }
    };
    std::vector<std::thread> pool;
    const int jobs = std::max(1, cfg.jobs);
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  struct Task {
    std::size_t state;
    int order;
  };
  std::vector<Task> tasks;
  for (int d : cfg.orders)
    for (std::size_t i = 0; i < states.size(); ++i) tasks.push_back({i, d});

  std::vector<Table1Row> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const auto& task = tasks[t];
      Table1Row row;
      row.x0 = states[task.state];
      row.order = task.order;
      row.oracle_T = oracle_T[task.state];
      const OcpResult r = solve_ocp(prob, 0.0, row.x0, task.order, cfg.app);
      row.status = r.status;
      if (!r.certificates.empty()) {
        row.sos_bound = r.bound;
        row.verified = r.verified;
        row.gap = row.oracle_T - r.bound;
      }
      rows[t] = std::move(row);
    }
  };
  std::vector<std::thread> pool;
  const int jobs = std::max(1, cfg.jobs);
  for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  // Nesting pass: certificates of lower degree remain valid at every higher
  // order, so the certified bound at order d is the best verified bound over
  // orders <= d.
  for (std::size_t i = 0; i < states.size(); ++i) {
    double best = 0.0;
    bool have_best = false;
    for (std::size_t o = 0; o < cfg.orders.size(); ++o) {
      Table1Row& row = rows[o * states.size() + i];
      if (have_best && (!row.verified || row.sos_bound < best)) {
        row.sos_bound = best;
        row.gap = row.oracle_T - best;
        row.verified = true;
        row.carried = true;
      }
      if (row.verified && (!have_best || row.sos_bound > best)) {
        best = row.sos_bound;
        have_best = true;
      }
    }
  }
  return rows;
}

std::string table1_csv(const std::vector<Table1Row>& rows) {
  std::ostringstream os;
  os.precision(12);
  os << "x1,x2,x3,order,sos_bound,oracle_T,gap,verified,source,status\n";
  for (const auto& r : rows) {
    os << r.x0[0] << "," << r.x0[1] << "," << r.x0[2] << "," << r.order << "," << r.sos_bound
       << "," << r.oracle_T << "," << r.gap << "," << (r.verified ? 1 : 0) << ","
       << (r.carried ? "carried" : "fresh") << "," << to_string(r.status) << "\n";
  }
  return os.str();
}

RescaledIoc rescale_to_unit_horizon(const std::vector<Trajectory>& trajs, double state_box_radius,
                                    double control_margin) {
  if (trajs.empty()) throw std::invalid_argument("rescale_to_unit_horizon: no trajectories");
  double t_max = 0.0;
  for (const auto& tr : trajs) t_max = std::max(t_max, tr.duration());
  if (t_max <= 0) throw std::invalid_argument("rescale_to_unit_horizon: zero-duration input");

  RescaledIoc out;
  out.control_radius = t_max * (1.0 + control_margin);
  for (const auto& tr : trajs) {
    const double T = tr.duration();
    Trajectory rs;
    rs.t0 = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      rs.times.push_back((tr.times[k] - tr.times.front()) / T);
      rs.states.push_back(tr.states[k]);
      std::vector<double> w = tr.controls[k];
      for (double& c : w) c *= T;
      rs.controls.push_back(std::move(w));
    }
    rs.times.back() = 1.0;
    out.trajectories.push_back(std::move(rs));
  }

  VariableSet xs({"x1", "x2", "x3"});
  VariableSet us({"u1", "u2"});
  VariableSet xu({"x1", "x2", "x3", "u1", "u2"});
  const Polynomial u1 = Polynomial::variable(xu, "u1");
  const Polynomial u2 = Polynomial::variable(xu, "u2");
  const Polynomial x1 = Polynomial::variable(xu, "x1");
  const Polynomial x2 = Polynomial::variable(xu, "x2");
  std::vector<std::pair<double, double>> xb(3, {-state_box_radius, state_box_radius});
  out.problem = make_control_problem(
      xs, us, {u1, u2, u1 * x2 - u2 * x1}, Polynomial::constant(xu, 1.0), Polynomial::zero(xs),
      box_set(xs, xb), ball_set(us, out.control_radius), point_set(xs, {0.0, 0.0, 0.0}),
      Horizon::FixedUnit);
  return out;
}

}  // namespace certbound
