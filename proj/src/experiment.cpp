#include "cavitytn/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <thread>

#include "cavitytn/exact.hpp"
#include "cavitytn/rng.hpp"
#include "cavitytn/sp.hpp"
#include "cavitytn/tfg.hpp"

namespace cavitytn {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

void format_double(std::ostringstream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
  } else {
    os << v;
  }
}

// Runs tasks [0, count) over a bounded pool; results land in pre-sized
// slots, so the output is independent of scheduling.
template <typename Fn>
void parallel_for(int count, int workers, Fn&& fn) {
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  const int n_threads = std::min(workers, count);
  pool.reserve(static_cast<size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  for (auto& th : pool) th.join();
}

}  // namespace

int default_workers() {
  if (const char* env = std::getenv("CAVITY_TN_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::string engine_name(Engine e) {
  switch (e) {
    case Engine::kBp:
      return "bp";
    case Engine::kSp:
      return "sp";
    case Engine::kWalksat:
      return "walksat";
    case Engine::kSpWalksat:
      return "sp-walksat";
  }
  return "?";
}

std::uint64_t instance_seed(std::uint64_t base, int alpha_index, int instance_index) {
  return derive_seed(base, 0x696e7374u, static_cast<std::uint64_t>(alpha_index),
                     static_cast<std::uint64_t>(instance_index));
}

std::uint64_t run_seed(std::uint64_t base, Engine engine, int alpha_index,
                       int instance_index) {
  return derive_seed(base, 0x72756e00u + static_cast<std::uint64_t>(engine),
                     static_cast<std::uint64_t>(alpha_index),
                     static_cast<std::uint64_t>(instance_index));
}

std::vector<ValidateRow> run_validate(const ValidateSpec& spec) {
  const int points = static_cast<int>(spec.alphas.size());
  const int total = points * spec.instances_per_point;
  std::vector<ValidateRow> rows(static_cast<size_t>(total));
  const int workers = spec.workers > 0 ? spec.workers : default_workers();

  parallel_for(total, workers, [&](int task) {
    const int ai = task / spec.instances_per_point;
    const int ii = task % spec.instances_per_point;
    const double alpha = spec.alphas[static_cast<size_t>(ai)];
    const int m = static_cast<int>(std::lround(alpha * spec.n));
    const std::uint64_t iseed = instance_seed(spec.seed, ai, ii);
    const CnfInstance inst = random_ksat(spec.n, m, 3, iseed);

    ValidateRow row;
    row.alpha = alpha;
    row.n = spec.n;
    row.seed = iseed;

    const ExactSummary exact = enumerate_all(inst);
    row.sat = !exact.unsat();
    row.s_exact_per_n = exact.unsat() ? kNan : exact.per_variable_entropy;

    TensorFactorGraph graph = build_tfg(inst);
    BpConfig cfg = spec.bp;
    cfg.seed = run_seed(spec.seed, Engine::kBp, ai, ii);
    const BpReport report = run_bp(graph, cfg);
    row.bp_converged = report.converged();

    EstimatedMarginals est;
    est.unsat_claimed = report.contradiction;
    if (!report.contradiction) {
      try {
        est.marginals.resize(static_cast<size_t>(spec.n));
        for (int v = 0; v < spec.n; ++v) {
          const Marginal mv = variable_marginal(graph, report.environments, v);
          est.marginals[static_cast<size_t>(v)] = {mv.distribution(0), mv.distribution(1)};
        }
        row.s_bethe_per_n = bethe_free_entropy(graph, report.environments) / spec.n;
      } catch (const ContradictionError&) {
        est.unsat_claimed = true;
        est.marginals.clear();
      }
    }
    if (est.unsat_claimed) row.s_bethe_per_n = kNan;
    row.marginal_distance = marginal_distance(exact, est);
    rows[static_cast<size_t>(task)] = row;
  });
  return rows;
}

std::string validate_csv(const ValidateSpec& spec, const std::vector<ValidateRow>& rows) {
  std::ostringstream os;
  os << "# config: validate n=" << spec.n << " instances=" << spec.instances_per_point
     << " seed=" << spec.seed << " tol=" << spec.bp.tolerance
     << " max_iters=" << spec.bp.max_iterations << " alphas=";
  for (size_t i = 0; i < spec.alphas.size(); ++i)
    os << (i ? "," : "") << spec.alphas[i];
  os << "\n";
  os << "alpha,n,seed,s_exact_per_n,s_bethe_per_n,marginal_distance,bp_converged\n";
  for (const ValidateRow& r : rows) {
    os << r.alpha << ',' << r.n << ',' << r.seed << ',';
    format_double(os, r.s_exact_per_n);
    os << ',';
    format_double(os, r.s_bethe_per_n);
    os << ',';
    format_double(os, r.marginal_distance);
    os << ',' << (r.bp_converged ? 1 : 0) << "\n";
  }
  // Aggregate means per alpha; NaN entries are skipped.
  for (size_t i = 0; i < spec.alphas.size(); ++i) {
    const double alpha = spec.alphas[i];
    double se = 0, sb = 0, md = 0;
    int nse = 0, nsb = 0, nmd = 0, conv = 0, count = 0;
    for (const ValidateRow& r : rows) {
      if (r.alpha != alpha) continue;
      ++count;
      conv += r.bp_converged ? 1 : 0;
      if (!std::isnan(r.s_exact_per_n)) se += r.s_exact_per_n, ++nse;
      if (!std::isnan(r.s_bethe_per_n)) sb += r.s_bethe_per_n, ++nsb;
      if (!std::isnan(r.marginal_distance)) md += r.marginal_distance, ++nmd;
    }
    os << alpha << ',' << spec.n << ",mean,";
    format_double(os, nse ? se / nse : kNan);
    os << ',';
    format_double(os, nsb ? sb / nsb : kNan);
    os << ',';
    format_double(os, nmd ? md / nmd : kNan);
    os << ',' << (count ? static_cast<double>(conv) / count : 0.0) << "\n";
  }
  return os.str();
}

namespace {

SolveStatus solve_one(const CnfInstance& inst, Engine engine, const SweepSpec& spec,
                      std::uint64_t seed, SweepRecord& rec) {
  DecimationConfig cfg = spec.solver;
  cfg.seed = seed;
  cfg.bp.seed = seed;
  switch (engine) {
    case Engine::kBp: {
      cfg.engine = SolverEngine::kBp;
      cfg.walksat_on_residual = false;
      const SolveResult r = decimate(inst, cfg);
      rec.decimation_steps = r.decimation_steps;
      if (r.sat()) rec.sound = energy(inst, r.assignment) == 0;
      return r.status;
    }
    case Engine::kSp: {
      cfg.engine = SolverEngine::kSp;
      cfg.walksat_on_residual = false;
      const SolveResult r = decimate(inst, cfg);
      rec.decimation_steps = r.decimation_steps;
      if (r.sat()) rec.sound = energy(inst, r.assignment) == 0;
      return r.status;
    }
    case Engine::kSpWalksat: {
      cfg.engine = SolverEngine::kSp;
      cfg.walksat_on_residual = true;
      const SolveResult r = decimate(inst, cfg);
      rec.decimation_steps = r.decimation_steps;
      if (r.sat()) rec.sound = energy(inst, r.assignment) == 0;
      return r.status;
    }
    case Engine::kWalksat: {
      // Best-of over the configured mixing values (flagged in the engine
      // label when more than one).
      const std::vector<double> ps = spec.mixing_values.empty()
                                         ? std::vector<double>{spec.solver.walksat_mixing}
                                         : spec.mixing_values;
      SolveStatus status = SolveStatus::kUnknown;
      for (size_t pi = 0; pi < ps.size(); ++pi) {
        const SolveResult r =
            walksat(inst, spec.solver.walksat_flips, ps[pi],
                    derive_seed(seed, 0x7073u, static_cast<std::uint64_t>(pi)),
                    spec.solver.restrict_greedy);
        if (r.sat()) {
          rec.sound = energy(inst, r.assignment) == 0;
          status = SolveStatus::kSat;
          break;
        }
      }
      return status;
    }
  }
  return SolveStatus::kUnknown;
}

}  // namespace

SweepOutput run_sweep(const SweepSpec& spec) {
  const int points = static_cast<int>(spec.alphas.size());
  const int engines = static_cast<int>(spec.engines.size());
  const int total = points * engines * spec.instances_per_point;
  SweepOutput out;
  out.records.resize(static_cast<size_t>(total));
  const int workers = spec.workers > 0 ? spec.workers : default_workers();

  parallel_for(total, workers, [&](int task) {
    const int ei = task / (points * spec.instances_per_point);
    const int rest = task % (points * spec.instances_per_point);
    const int ai = rest / spec.instances_per_point;
    const int ii = rest % spec.instances_per_point;
    const Engine engine = spec.engines[static_cast<size_t>(ei)];
    const double alpha = spec.alphas[static_cast<size_t>(ai)];
    const int m = static_cast<int>(std::lround(alpha * spec.n));
    const CnfInstance inst =
        random_ksat(spec.n, m, spec.k, instance_seed(spec.seed, ai, ii));

    SweepRecord rec;
    rec.engine = engine;
    rec.alpha = alpha;
    rec.alpha_index = ai;
    rec.instance_index = ii;
    rec.seed = run_seed(spec.seed, engine, ai, ii);
    const auto t0 = std::chrono::steady_clock::now();
    rec.status = solve_one(inst, engine, spec, rec.seed, rec);
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    out.records[static_cast<size_t>(task)] = rec;
  });

  for (int ei = 0; ei < engines; ++ei)
    for (int ai = 0; ai < points; ++ai) {
      SweepAggregate agg;
      agg.engine = spec.engines[static_cast<size_t>(ei)];
      agg.engine_label = engine_name(agg.engine);
      if (agg.engine == Engine::kWalksat && spec.mixing_values.size() > 1) {
        std::ostringstream lbl;
        lbl << "walksat[best-of-p:";
        for (size_t i = 0; i < spec.mixing_values.size(); ++i)
          lbl << (i ? "," : "") << spec.mixing_values[i];
        lbl << "]";
        agg.engine_label = lbl.str();
      }
      agg.alpha = spec.alphas[static_cast<size_t>(ai)];
      agg.n = spec.n;
      double wall = 0.0;
      for (const SweepRecord& r : out.records) {
        if (r.engine != agg.engine || r.alpha_index != ai) continue;
        ++agg.total;
        if (r.status == SolveStatus::kSat) ++agg.successes;
        wall += r.wall_ms;
      }
      agg.fraction = agg.total ? static_cast<double>(agg.successes) / agg.total : 0.0;
      agg.mean_wall_ms = agg.total ? wall / agg.total : 0.0;
      out.aggregates.push_back(std::move(agg));
    }
  return out;
}

std::string sweep_csv(const SweepSpec& spec, const SweepOutput& out) {
  std::ostringstream os;
  os << "# config: sweep n=" << spec.n << " k=" << spec.k
     << " instances=" << spec.instances_per_point << " seed=" << spec.seed
     << " tol=" << spec.solver.bp.tolerance << " max_iters=" << spec.solver.bp.max_iterations
     << " flips=" << spec.solver.walksat_flips << " mixing=" << spec.solver.walksat_mixing
     << " bias_threshold=" << spec.solver.bias_threshold << " alphas=";
  for (size_t i = 0; i < spec.alphas.size(); ++i)
    os << (i ? "," : "") << spec.alphas[i];
  os << " engines=";
  for (size_t i = 0; i < spec.engines.size(); ++i)
    os << (i ? "," : "") << engine_name(spec.engines[i]);
  os << "\n";
  os << "engine,alpha,n,successes,total,fraction,mean_wall_ms\n";
  for (const SweepAggregate& a : out.aggregates)
    os << a.engine_label << ',' << a.alpha << ',' << a.n << ',' << a.successes << ','
       << a.total << ',' << a.fraction << ',' << a.mean_wall_ms << "\n";
  return os.str();
}

}  // namespace cavitytn
