#include "runner.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "pool.hpp"

namespace bifamp {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

VarianceMode variance_mode_from_string(const std::string& s) {
  if (s == "general") return VarianceMode::general;
  if (s == "nishimori") return VarianceMode::nishimori;
  if (s == "full_tap") return VarianceMode::full_tap;
  throw std::invalid_argument("amp: unknown variance_mode '" + s + "'");
}

UpdateSchedule schedule_from_string(const std::string& s) {
  if (s == "parallel") return UpdateSchedule::parallel;
  if (s == "block_sequential") return UpdateSchedule::block_sequential;
  throw std::invalid_argument("amp: unknown schedule '" + s + "'");
}

AmpInit amp_init_from_string(const std::string& s) {
  if (s == "prior") return AmpInit::prior;
  if (s == "planted") return AmpInit::planted;
  if (s == "cs") return AmpInit::cs;
  throw std::invalid_argument("amp: unknown init '" + s + "'");
}

SeInit se_init_from_string(const std::string& s) {
  if (s == "uninformative") return SeInit::uninformative;
  if (s == "informative") return SeInit::informative;
  if (s == "custom") return SeInit::custom;
  throw std::invalid_argument("se: unknown init '" + s + "'");
}

AmpOptions parse_amp_options(const nlohmann::json& j) {
  require_known_keys(j, "amp",
                     {"max_iterations", "tolerance", "damping", "variance_mode",
                      "schedule", "init", "blocks", "align_overlaps_first",
                      "track_free_entropy", "planted_variance"});
  AmpOptions o;
  if (j.contains("max_iterations")) o.max_iterations = j.at("max_iterations").get<long>();
  if (j.contains("tolerance")) o.tolerance = j.at("tolerance").get<double>();
  if (j.contains("damping")) o.damping = j.at("damping").get<double>();
  if (!(o.damping > 0.0) || o.damping > 1.0)
    throw std::invalid_argument("amp: damping must be in (0, 1]");
  if (!(o.tolerance > 0.0)) throw std::invalid_argument("amp: tolerance must be > 0");
  if (j.contains("variance_mode"))
    o.variance_mode = variance_mode_from_string(j.at("variance_mode").get<std::string>());
  if (j.contains("schedule"))
    o.schedule = schedule_from_string(j.at("schedule").get<std::string>());
  if (j.contains("init")) o.init = amp_init_from_string(j.at("init").get<std::string>());
  if (j.contains("blocks")) o.blocks = j.at("blocks").get<int>();
  if (j.contains("align_overlaps_first"))
    o.align_overlaps_first = j.at("align_overlaps_first").get<int>();
  if (j.contains("track_free_entropy"))
    o.track_free_entropy = j.at("track_free_entropy").get<bool>();
  if (j.contains("planted_variance"))
    o.planted_variance = j.at("planted_variance").get<double>();
  return o;
}

SeOptions parse_se_options(const nlohmann::json& j) {
  require_known_keys(j, "se",
                     {"init", "m_x0", "m_f0", "tolerance", "max_iterations",
                      "quadrature_order", "symmetry_seed"});
  SeOptions o;
  if (j.contains("init")) o.init = se_init_from_string(j.at("init").get<std::string>());
  if (j.contains("m_x0")) o.m_x0 = j.at("m_x0").get<double>();
  if (j.contains("m_f0")) o.m_f0 = j.at("m_f0").get<double>();
  if (j.contains("tolerance")) o.tolerance = j.at("tolerance").get<double>();
  if (!(o.tolerance > 0.0)) throw std::invalid_argument("se: tolerance must be > 0");
  if (j.contains("max_iterations")) o.max_iterations = j.at("max_iterations").get<long>();
  if (j.contains("quadrature_order"))
    o.quadrature_order = j.at("quadrature_order").get<int>();
  if (j.contains("symmetry_seed")) o.symmetry_seed = j.at("symmetry_seed").get<double>();
  return o;
}

}  // namespace

RunConfig RunConfig::parse(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  require_known_keys(j, "config",
                     {"problem", "n", "seed", "instance", "amp", "se", "thresholds",
                      "phase", "threads", "out", "trace_out", "emit_plot", "strict",
                      "command"});
  RunConfig c;
  c.raw = j;
  if (j.contains("problem")) {
    c.problem = ProblemSpec::from_json(j.at("problem"));
    c.has_problem = true;
  }
  if (j.contains("n")) c.n = j.at("n").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("instance")) c.instance_path = j.at("instance").get<std::string>();
  if (j.contains("amp")) c.amp = parse_amp_options(j.at("amp"));
  if (j.contains("se")) c.se = parse_se_options(j.at("se"));
  if (j.contains("thresholds")) c.thresholds = j.at("thresholds");
  if (j.contains("phase")) c.phase = j.at("phase");
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  if (j.contains("out")) c.out_path = j.at("out").get<std::string>();
  if (j.contains("trace_out")) c.trace_path = j.at("trace_out").get<std::string>();
  if (j.contains("emit_plot")) c.emit_plot = j.at("emit_plot").get<bool>();
  if (j.contains("strict")) c.strict = j.at("strict").get<bool>();
  c.amp.seed = c.seed;
  return c;
}

RunOutput run_amp(const Instance& inst, const RunConfig& config) {
  AmpOptions options = config.amp;
  options.seed = config.seed;
  AmpResult result = amp_run(inst, options, true);
  MseReport mse = evaluate_mse(result.state.a, result.state.r, inst.x0, inst.f0, inst.n);
  FreeEntropyReport fe = bethe_free_entropy(result.state, inst);

  RunOutput out;
  out.converged = result.converged;
  nlohmann::json& s = out.summary;
  s["command"] = "amp";
  s["problem"] = inst.problem.to_json();
  s["n"] = inst.n;
  s["seed"] = inst.seed;
  s["realized_alpha"] = inst.realized_alpha();
  s["realized_pi"] = inst.realized_pi();
  s["converged"] = result.converged;
  s["iterations"] = result.iterations;
  s["mse"] = {{"z", mse.mse_z},
              {"x_aligned", mse.mse_x_aligned},
              {"f_aligned", mse.mse_f_aligned}};
  s["overlap"] = {{"m_x", overlap_x(result.state.a, inst.x0)},
                  {"m_f", overlap_f(result.state.r, inst.f0, inst.n)}};
  s["free_entropy"] = {{"phi_bethe", fe.phi_bethe},
                       {"phi_bethe_per_n2", fe.phi_bethe_per_n2},
                       {"phi_variational", fe.phi_variational},
                       {"term_kl_x", fe.term_kl_x},
                       {"term_kl_f", fe.term_kl_f},
                       {"term_output", fe.term_output},
                       {"term_correction", fe.term_correction},
                       {"fixed_point_residual", fe.fixed_point_residual},
                       {"flagged", fe.flagged}};
  if (std::isfinite(fe.phi_vmf)) s["free_entropy"]["phi_vmf"] = fe.phi_vmf;
  s["nishimori"] = {{"lhs", result.last.nishimori_lhs},
                    {"rhs", result.last.nishimori_rhs}};

  std::ostringstream csv;
  csv << "iteration,delta_a,m_x,m_f,m_x_aligned,m_f_aligned,mse_z,"
         "nishimori_lhs,nishimori_rhs,v_mean,phi_bethe\n";
  for (const auto& row : result.trace) {
    csv << row.iteration << ',' << format_double(row.delta_a) << ','
        << format_double(row.m_x) << ',' << format_double(row.m_f) << ',';
    if (row.aligned_valid)
      csv << format_double(row.m_x_aligned) << ',' << format_double(row.m_f_aligned);
    else
      csv << ',';
    csv << ',' << format_double(row.mse_z) << ','
        << format_double(row.nishimori_lhs) << ','
        << format_double(row.nishimori_rhs) << ',' << format_double(row.v_mean)
        << ',';
    if (row.phi_valid) csv << format_double(row.phi_bethe);
    csv << '\n';
  }
  out.tables["trace"] = csv.str();
  return out;
}

namespace {

nlohmann::json se_state_json(const ProblemSpec& p, const SeState& s) {
  nlohmann::json j;
  j["m_x"] = s.m_x;
  if (s.m_f.size() == 1)
    j["m_f"] = s.m_f[0];
  else
    j["m_f"] = s.m_f;
  j["e_x"] = se_e_x(p, s);
  j["e_f"] = se_e_f(p, s);
  return j;
}

}  // namespace

RunOutput run_se(const RunConfig& config) {
  if (!config.has_problem) throw std::invalid_argument("se: config needs 'problem'");
  SeResult result = se_run(config.problem, config.se);

  RunOutput out;
  out.converged = result.converged;
  nlohmann::json& s = out.summary;
  s["command"] = "se";
  s["problem"] = config.problem.to_json();
  s["converged"] = result.converged;
  s["iterations"] = result.iterations;
  s["fixed_point"] = se_state_json(config.problem, result.fixed_point);
  s["final_change"] = result.final_change;
  s["monotonicity_violation"] = result.monotonicity_violation;
  s["quadrature_order"] = result.quadrature_order_used;
  try {
    s["phi"] = replica_free_entropy(config.problem, result.fixed_point,
                                    config.se.quadrature_order);
  } catch (const std::exception&) {
    // overlaps on the domain boundary (e.g. exact recovery at delta = 0)
  }

  std::ostringstream csv;
  bool multi = result.fixed_point.m_f.size() > 1;
  csv << "iteration,m_x";
  if (multi)
    for (std::size_t k = 0; k < result.fixed_point.m_f.size(); ++k)
      csv << ",m_f" << (k + 1);
  else
    csv << ",m_f";
  csv << ",e_x,e_f\n";
  long stride = result.trajectory_stride;
  for (std::size_t t = 0; t < result.trajectory.size(); ++t) {
    const SeState& st = result.trajectory[t];
    csv << (t == 0 ? 0 : (stride == 1 ? long(t) : long(t) * stride));
    csv << ',' << format_double(st.m_x);
    for (double mf : st.m_f) csv << ',' << format_double(mf);
    csv << ',' << format_double(se_e_x(config.problem, st)) << ','
        << format_double(se_e_f(config.problem, st)) << '\n';
  }
  out.tables["trajectory"] = csv.str();
  return out;
}

namespace {

nlohmann::json threshold_json(const ThresholdValue& t) {
  nlohmann::json j;
  j["exists"] = t.exists;
  if (t.exists) j["value"] = t.value;
  j["method"] = t.method;
  if (t.bracket_width > 0) j["bracket_width"] = t.bracket_width;
  if (!t.note.empty()) j["note"] = t.note;
  return j;
}

}  // namespace

RunOutput run_thresholds(const RunConfig& config) {
  if (!config.has_problem)
    throw std::invalid_argument("thresholds: config needs 'problem'");
  ThresholdReport rep = stability_thresholds(config.problem);

  auto run_bisection = [&](const nlohmann::json& req, bool spinodal) {
    require_known_keys(req, "thresholds request", {"param", "lo", "hi", "width"});
    SweepParam param = req.contains("param")
                           ? sweep_param_from_string(req.at("param").get<std::string>())
                           : natural_sweep_param(config.problem);
    double lo = req.at("lo").get<double>();
    double hi = req.at("hi").get<double>();
    double width = req.contains("width") ? req.at("width").get<double>() : 1e-3;
    return spinodal ? find_spinodal(config.problem, param, lo, hi, width)
                    : find_first_order(config.problem, param, lo, hi, width);
  };
  if (!config.thresholds.is_null()) {
    require_known_keys(config.thresholds, "thresholds", {"spinodal", "first_order"});
    if (config.thresholds.contains("spinodal"))
      rep.spinodal = run_bisection(config.thresholds.at("spinodal"), true);
    if (config.thresholds.contains("first_order"))
      rep.first_order = run_bisection(config.thresholds.at("first_order"), false);
  }

  RunOutput out;
  nlohmann::json& s = out.summary;
  s["command"] = "thresholds";
  s["problem"] = config.problem.to_json();
  s["sweep_param"] = to_string(rep.param);
  s["counting_bound"] = threshold_json(rep.counting);
  s["informative_stability"] = threshold_json(rep.informative_stability);
  s["uninformative_stability"] = threshold_json(rep.uninformative_stability);
  s["spinodal"] = threshold_json(rep.spinodal);
  s["first_order"] = threshold_json(rep.first_order);
  s["jacobian_mismatch"] = rep.jacobian_mismatch;
  // ordering invariant: counting <= first order <= spinodal when all exist
  if (rep.counting.exists && rep.first_order.exists && rep.spinodal.exists) {
    double slack = 2e-3;
    s["ordering_ok"] =
        rep.counting.value <= rep.first_order.value + slack &&
        rep.first_order.value <= rep.spinodal.value + slack;
  }
  return out;
}

RunOutput run_phase(const RunConfig& config) {
  if (!config.has_problem) throw std::invalid_argument("phase: config needs 'problem'");
  if (config.phase.is_null() || !config.phase.contains("axes"))
    throw std::invalid_argument("phase: config needs 'phase.axes'");
  require_known_keys(config.phase, "phase", {"axes"});
  std::vector<SweepAxis> axes;
  for (const auto& a : config.phase.at("axes")) {
    require_known_keys(a, "phase axis", {"param", "from", "to", "count", "values"});
    SweepParam param = sweep_param_from_string(a.at("param").get<std::string>());
    if (a.contains("values")) {
      SweepAxis axis;
      axis.param = param;
      axis.values = a.at("values").get<std::vector<double>>();
      axes.push_back(std::move(axis));
    } else {
      axes.push_back(SweepAxis::linspace(param, a.at("from").get<double>(),
                                         a.at("to").get<double>(),
                                         a.at("count").get<int>()));
    }
  }
  if (config.threads > 0) set_thread_limit(config.threads);
  std::vector<SweepRow> rows = sweep_grid(config.problem, axes, config.se);

  RunOutput out;
  nlohmann::json& s = out.summary;
  s["command"] = "phase";
  s["problem"] = config.problem.to_json();
  s["rows"] = rows.size();
  nlohmann::json jaxes = nlohmann::json::array();
  for (const auto& axis : axes)
    jaxes.push_back({{"param", to_string(axis.param)}, {"count", axis.values.size()}});
  s["axes"] = jaxes;

  std::ostringstream csv;
  for (const auto& axis : axes) csv << to_string(axis.param) << ',';
  csv << "mmse_x,mmse_f,ampmse_x,ampmse_f,regime,converged,error\n";
  long failures = 0;
  for (const auto& row : rows) {
    for (double v : row.coords) csv << format_double(v) << ',';
    if (row.failed) {
      ++failures;
      csv << ",,,,failed,," << '"' << row.error << '"' << '\n';
      continue;
    }
    csv << format_double(row.report.mmse_x) << ',' << format_double(row.report.mmse_f)
        << ',' << format_double(row.report.ampmse_x) << ','
        << format_double(row.report.ampmse_f) << ',' << to_string(row.report.regime)
        << ',' << (row.report.converged ? 1 : 0) << ",\n";
  }
  s["failures"] = failures;
  out.tables["grid"] = csv.str();

  if (config.emit_plot && !axes.empty()) {
    std::ostringstream plot;
    std::string csv_name = config.out_path.empty() ? "phase_grid.csv" : config.out_path;
    plot << "set datafile separator ','\n";
    plot << "set key autotitle columnhead\n";
    plot << "set xlabel '" << to_string(axes.back().param) << "'\n";
    plot << "set ylabel 'MSE'\n";
    std::size_t xcol = axes.size();  // last axis column (1-based)
    std::size_t first_val = axes.size() + 1;
    plot << "plot '" << csv_name << "' using " << xcol << ':' << first_val
         << " with linespoints title 'MMSE_X', '' using " << xcol << ':'
         << (first_val + 2) << " with linespoints title 'AMP-MSE_X'\n";
    out.tables["plot"] = plot.str();
  }
  return out;
}

}  // namespace bifamp
