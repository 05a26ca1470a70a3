#include "kamlin/cocycle.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <tuple>
#include <sstream>

#include "kamlin/error.hpp"

namespace kamlin {

namespace {

double wrap(double phase) {
  double p = std::fmod(phase, kTwoPi);
  if (p < 0.0) p += kTwoPi;
  return p >= kTwoPi ? 0.0 : p;
}

// distance of a phase to 0 mod 2pi
double phase_distance(double phase) {
  const double p = wrap(phase);
  return std::min(p, kTwoPi - p);
}

Error invalid(const std::string& msg) { return Error(ErrorKind::InvalidScenario, msg); }

Eigen::MatrixXcd mode_matrix(const UnitaryFlatBundle& bundle, int n) {
  const Nerve& nerve = bundle.nerve();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(nerve.edge_count(), nerve.chart_count());
  for (int e = 0; e < nerve.edge_count(); ++e) {
    const auto& edge = nerve.edge(e);
    m(e, edge.to) += bundle.multiplier(e, n);
    m(e, edge.from) -= 1.0;
  }
  return m;
}

using Svd = Eigen::JacobiSVD<Eigen::MatrixXcd>;

[[noreturn]] void throw_resonant(const UnitaryFlatBundle& bundle, int n, double ratio) {
  // report the fundamental loop whose n-th power holonomy is closest to 1
  std::vector<int> worst_loop;
  std::optional<double> worst_holonomy;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& loop : fundamental_loops(bundle.nerve())) {
    const double h = holonomy(bundle, loop);
    const double d = phase_distance(n * h);
    if (d < best) {
      best = d;
      worst_loop.clear();
      for (const auto& s : loop) worst_loop.push_back(s.forward ? s.edge : -s.edge - 1);
      worst_holonomy = h;
    }
  }
  std::ostringstream os;
  os << "resonant mode n = " << n << ": relative smallest singular value " << ratio;
  if (worst_holonomy) os << "; loop holonomy " << *worst_holonomy << " satisfies n * holonomy = 0 mod 2pi";
  Error err(ErrorKind::ResonantMode, os.str());
  err.mode = n;
  err.loop = std::move(worst_loop);
  err.holonomy = worst_holonomy;
  throw err;
}

// Checks resonance and returns the relative smallest singular value.
double check_resonance(const Svd& svd, const UnitaryFlatBundle& bundle, int n, double resonance_rel) {
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  const double smin = s.size() ? s(s.size() - 1) : 0.0;
  // entries are unit-modulus combinations, so the scale never drops below 1
  const double ratio = smin / std::max(smax, 1.0);
  if (ratio < resonance_rel) throw_resonant(bundle, n, ratio);
  return ratio;
}

}  // namespace

Nerve::Nerve(std::vector<int> chart_ids, std::vector<NerveEdge> edges, std::vector<std::array<int, 3>> triples)
    : chart_ids_(std::move(chart_ids)), edges_(std::move(edges)), triples_(std::move(triples)) {
  if (chart_ids_.empty()) throw invalid("nerve has no charts");
  if (std::set<int>(chart_ids_.begin(), chart_ids_.end()).size() != chart_ids_.size())
    throw invalid("duplicate chart ids");
  const int c = chart_count();
  std::set<std::tuple<int, int, std::string>> seen;
  for (const auto& e : edges_) {
    if (e.from < 0 || e.from >= c || e.to < 0 || e.to >= c) throw invalid("edge references an unknown chart");
    if (!seen.insert({e.from, e.to, e.label}).second) {
      std::ostringstream os;
      os << "edge label '" << e.label << "' repeated between charts " << chart_ids_[static_cast<size_t>(e.from)]
         << " and " << chart_ids_[static_cast<size_t>(e.to)];
      throw invalid(os.str());
    }
  }
  for (const auto& t : triples_)
    for (int j : t)
      if (j < 0 || j >= c) throw invalid("triple references an unknown chart");

  // connectivity of the underlying undirected graph
  std::vector<bool> reached(static_cast<size_t>(c), false);
  std::deque<int> queue{0};
  reached[0] = true;
  while (!queue.empty()) {
    const int j = queue.front();
    queue.pop_front();
    for (const auto& e : edges_) {
      for (auto [a, b] : {std::pair{e.from, e.to}, std::pair{e.to, e.from}}) {
        if (a == j && !reached[static_cast<size_t>(b)]) {
          reached[static_cast<size_t>(b)] = true;
          queue.push_back(b);
        }
      }
    }
  }
  if (std::find(reached.begin(), reached.end(), false) != reached.end())
    throw invalid("nerve graph is not connected");
}

std::optional<int> Nerve::find_edge(int from, int to, std::string_view label) const {
  for (int e = 0; e < edge_count(); ++e)
    if (edges_[static_cast<size_t>(e)].from == from && edges_[static_cast<size_t>(e)].to == to &&
        edges_[static_cast<size_t>(e)].label == label)
      return e;
  return std::nullopt;
}

std::vector<Loop> fundamental_loops(const Nerve& nerve) {
  const int c = nerve.chart_count();
  // parent edge of each chart in the BFS tree, and its orientation toward the child
  std::vector<int> parent_edge(static_cast<size_t>(c), -1);
  std::vector<bool> parent_forward(static_cast<size_t>(c), true);
  std::vector<bool> reached(static_cast<size_t>(c), false);
  std::vector<bool> tree_edge(static_cast<size_t>(nerve.edge_count()), false);
  std::deque<int> queue{0};
  reached[0] = true;
  while (!queue.empty()) {
    const int j = queue.front();
    queue.pop_front();
    for (int e = 0; e < nerve.edge_count(); ++e) {
      const auto& edge = nerve.edge(e);
      int next = -1;
      bool forward = true;
      if (edge.from == j && !reached[static_cast<size_t>(edge.to)]) {
        next = edge.to;
      } else if (edge.to == j && !reached[static_cast<size_t>(edge.from)]) {
        next = edge.from;
        forward = false;
      }
      if (next < 0) continue;
      reached[static_cast<size_t>(next)] = true;
      parent_edge[static_cast<size_t>(next)] = e;
      parent_forward[static_cast<size_t>(next)] = forward;
      tree_edge[static_cast<size_t>(e)] = true;
      queue.push_back(next);
    }
  }
  // root -> chart path
  auto path_from_root = [&](int j) {
    Loop path;
    while (j != 0) {
      const int e = parent_edge[static_cast<size_t>(j)];
      path.push_back({e, parent_forward[static_cast<size_t>(j)]});
      j = parent_forward[static_cast<size_t>(j)] ? nerve.edge(e).from : nerve.edge(e).to;
    }
    std::reverse(path.begin(), path.end());
    return path;
  };
  std::vector<Loop> loops;
  for (int e = 0; e < nerve.edge_count(); ++e) {
    if (tree_edge[static_cast<size_t>(e)]) continue;
    Loop loop = path_from_root(nerve.edge(e).from);
    loop.push_back({e, true});
    Loop back = path_from_root(nerve.edge(e).to);
    std::reverse(back.begin(), back.end());
    for (auto s : back) loop.push_back({s.edge, !s.forward});
    loops.push_back(std::move(loop));
  }
  return loops;
}

UnitaryFlatBundle::UnitaryFlatBundle(Nerve nerve, std::vector<double> edge_phase)
    : nerve_(std::move(nerve)), phase_(std::move(edge_phase)) {
  if (static_cast<int>(phase_.size()) != nerve_.edge_count())
    throw invalid("bundle needs one phase per edge");
  for (auto& p : phase_) {
    if (!std::isfinite(p)) throw invalid("non-finite edge phase");
    p = wrap(p);
  }
  const double defect = cocycle_defect();
  if (defect > 1e-9) {
    std::ostringstream os;
    os << "edge phases violate the 1-cocycle condition by " << defect;
    throw invalid(os.str());
  }
}

cplx UnitaryFlatBundle::multiplier(int e, int n) const {
  // reduce n*phi mod 2pi before exponentiating to keep large modes exact
  return std::polar(1.0, wrap(static_cast<double>(n) * phase(e)));
}

double UnitaryFlatBundle::cocycle_defect() const {
  double worst = 0.0;
  auto pair_phase = [&](int a, int b) -> std::optional<double> {
    for (int e = 0; e < nerve_.edge_count(); ++e) {
      if (nerve_.edge(e).from == a && nerve_.edge(e).to == b) return phase(e);
      if (nerve_.edge(e).from == b && nerve_.edge(e).to == a) return -phase(e);
    }
    return std::nullopt;
  };
  for (const auto& [i, j, k] : nerve_.triples()) {
    auto ji = pair_phase(i, j), kj = pair_phase(j, k), ki = pair_phase(i, k);
    if (!ji || !kj || !ki) throw invalid("triple without edges on all three overlaps");
    worst = std::max(worst, phase_distance(*kj + *ji - *ki));
  }
  return worst;
}

double holonomy(const UnitaryFlatBundle& bundle, const Loop& loop) {
  if (loop.empty()) return 0.0;
  const Nerve& nerve = bundle.nerve();
  auto head = [&](const LoopStep& s) { return s.forward ? nerve.edge(s.edge).to : nerve.edge(s.edge).from; };
  auto tail = [&](const LoopStep& s) { return s.forward ? nerve.edge(s.edge).from : nerve.edge(s.edge).to; };
  double sum = 0.0;
  for (size_t i = 0; i < loop.size(); ++i) {
    if (loop[i].edge < 0 || loop[i].edge >= nerve.edge_count()) throw Error(ErrorKind::Path, "unknown edge in loop");
    const int next_tail = tail(loop[(i + 1) % loop.size()]);
    if (head(loop[i]) != next_tail) throw Error(ErrorKind::Path, "edge walk is not a closed path");
    sum += loop[i].forward ? bundle.phase(loop[i].edge) : -bundle.phase(loop[i].edge);
  }
  return wrap(sum);
}

ModeCochainSolution solve_mode(const UnitaryFlatBundle& bundle, int n, std::span<const cplx> b,
                               const ModeSolveOptions& opts) {
  const Nerve& nerve = bundle.nerve();
  if (n == 0) throw Error(ErrorKind::Domain, "solve_mode needs a nonzero mode");
  if (static_cast<int>(b.size()) != nerve.edge_count())
    throw Error(ErrorKind::Domain, "solve_mode needs one coefficient per edge");

  const Eigen::MatrixXcd m = mode_matrix(bundle, n);
  const Svd svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ModeCochainSolution sol;
  sol.n = n;
  sol.min_singular_ratio = check_resonance(svd, bundle, n, opts.resonance_rel);
  sol.kernel = nerve.chart_count() > std::min(nerve.edge_count(), nerve.chart_count());

  const Eigen::Map<const Eigen::VectorXcd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
  const Eigen::VectorXcd x = svd.solve(rhs);
  const Eigen::VectorXcd defect = m * x - rhs;
  sol.a.assign(x.data(), x.data() + x.size());
  sol.residual = defect.size() ? defect.cwiseAbs().maxCoeff() : 0.0;

  const double bmax = b.empty() ? 0.0 : rhs.cwiseAbs().maxCoeff();
  const double amax = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  sol.amplification = bmax > 0.0 ? amax / bmax : 0.0;

  const double scale = opts.scale > 0.0 ? opts.scale : bmax;
  const double tol = opts.solvability_rel * scale + 64.0 * std::numeric_limits<double>::min();
  if (sol.residual > tol) {
    std::ostringstream os;
    os << "mode n = " << n << " cochain is not a coboundary: residual " << sol.residual << " > " << tol;
    Error err(ErrorKind::CoboundaryFailure, os.str());
    err.mode = n;
    int worst = 0;
    defect.cwiseAbs().maxCoeff(&worst);
    err.edge = worst;
    throw err;
  }
  return sol;
}

AmplificationSpectrum amplification_spectrum(const UnitaryFlatBundle& bundle, int max_mode, double resonance_rel) {
  AmplificationSpectrum spec(max_mode);
  const int edges = bundle.nerve().edge_count();
  for (int k = 1; k <= 2 * max_mode; ++k) {
    const int n = k % 2 ? (k + 1) / 2 : -k / 2;  // 1, -1, 2, -2, ...
    const Eigen::MatrixXcd m = mode_matrix(bundle, n);
    const Svd svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    check_resonance(svd, bundle, n, resonance_rel);
    // column e of the solution operator = solution for the e-th edge basis vector
    Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(bundle.nerve().chart_count());
    for (int e = 0; e < edges; ++e) {
      const Eigen::VectorXcd col = svd.solve(Eigen::VectorXcd::Unit(edges, e));
      row_sums += col.cwiseAbs();
    }
    spec.set(n, row_sums.size() ? row_sums.maxCoeff() : 0.0);
  }
  return spec;
}

DiophantineFit fit_diophantine(const AmplificationSpectrum& spectrum, double mu, std::optional<double> C0_override) {
  DiophantineFit fit;
  fit.mu = mu;
  const int top = spectrum.max_mode();
  for (int n = -top; n <= top; ++n) {
    if (n == 0) continue;
    const double ratio = spectrum.at(n) / std::pow(std::abs(n), mu - 1.0);
    if (ratio > fit.C0) {
      fit.C0 = ratio;
      fit.argmax_mode = n;
    }
  }
  if (C0_override) fit.C0 = *C0_override;
  for (int n = -top; n <= top; ++n) {
    if (n == 0) continue;
    if (spectrum.at(n) > fit.C0 * std::pow(std::abs(n), mu - 1.0) * (1.0 + 1e-12)) fit.failing_modes.push_back(n);
  }
  if (top >= 4) {
    auto peak = [&](int lo, int hi) {  // max over lo < |n| <= hi
      double p = 0.0;
      for (int k = lo + 1; k <= hi; ++k) p = std::max({p, spectrum.at(k), spectrum.at(-k)});
      return p;
    };
    const double upper = peak(top / 2, top);
    const double lower = peak(top / 4, top / 2);
    if (upper > 0.0 && lower > 0.0) fit.growth_exponent = std::log2(upper / lower);
    fit.super_polynomial = fit.growth_exponent > mu;
  }
  return fit;
}

}  // namespace kamlin
