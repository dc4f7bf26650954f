// otroll: command-line front end for the OT transcription loss toolkit.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "otroll/otroll.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

int worker_count(std::size_t jobs) {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("OTROLL_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  return static_cast<int>(std::max<std::size_t>(1, std::min<std::size_t>(n, jobs)));
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw otroll::Error("cannot write " + out_path);
  out << j.dump(2) << "\n";
}

json to_json(const otroll::EvalReport& r) {
  json matches = json::array();
  for (const auto& [ref, est] : r.matches) matches.push_back({ref, est});
  return {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1},
          {"n_ref", r.n_ref},         {"n_est", r.n_est},   {"n_match", r.n_match},
          {"matches", matches}};
}

json to_json(const otroll::LossBreakdown& b) {
  return {{"transport", b.transport}, {"mass_penalty", b.mass_penalty}, {"total", b.total}};
}

void add_cost_flags(CLI::App* cmd, otroll::CostParams& p) {
  cmd->add_option("--tau0", p.tau0, "temporal cost cap in frames")->capture_default_str();
  cmd->add_option("--tau1", p.tau1, "cross-pitch transport cost")->capture_default_str();
  cmd->add_option("--lambda", p.lambda, "mass penalty weight")->capture_default_str();
}

struct GridFlags {
  int frames = 400;
  int pitches = otroll::Grid::kDefaultPitches;
  int lowest_pitch = otroll::Grid::kDefaultLowestPitch;
  double frame_period = otroll::Grid::kDefaultFramePeriod;

  void add(CLI::App* cmd, bool with_frames = true) {
    if (with_frames) cmd->add_option("--frames", frames, "frame count T")->capture_default_str();
    cmd->add_option("--pitches", pitches, "pitch count")->capture_default_str();
    cmd->add_option("--lowest-pitch", lowest_pitch, "MIDI note of pitch index 0")->capture_default_str();
    cmd->add_option("--frame-period", frame_period, "seconds per frame")->capture_default_str();
  }
  otroll::Grid grid() const { return otroll::Grid(frames, pitches, frame_period, lowest_pitch); }
};

// ---------------------------------------------------------------- grad-check

struct GradCheckOpts {
  int seeds = 100;
  std::uint64_t seed_base = 0;
  int frames = 16;
  int pitches = 12;
  int max_atoms = 10;
  double eps = 1e-4;
  double threshold = 1e-4;
  otroll::CostParams params;
  std::string out;
};

int run_grad_check(const GradCheckOpts& o) {
  o.params.validate();
  const auto n = static_cast<std::size_t>(std::max(0, o.seeds));
  std::vector<otroll::GradientCheck> results(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < worker_count(n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        const auto inst = otroll::random_instance(o.seed_base + k, o.frames, o.pitches, o.max_atoms);
        results[k] = otroll::check_gradient(inst.m, inst.targets, inst.grid, o.params, o.eps);
      }
    });
  }
  for (auto& t : pool) t.join();

  double worst = 0.0;
  json rows = json::array();
  for (std::size_t k = 0; k < n; ++k) {
    worst = std::max(worst, results[k].max_rel_error);
    rows.push_back({{"seed", o.seed_base + k},
                    {"max_rel_error", results[k].max_rel_error},
                    {"checked", results[k].n_checked},
                    {"excluded", results[k].n_excluded}});
  }
  const bool pass = worst < o.threshold;
  emit({{"max_rel_error", worst}, {"threshold", o.threshold}, {"pass", pass}, {"seeds", rows}}, o.out);
  return pass ? 0 : 1;
}

// ------------------------------------------------------------------ optimize

void write_trace(const std::string& path, const std::vector<double>& trace) {
  std::ofstream out(path);
  if (!out) throw otroll::Error("cannot write " + path);
  out << "step,loss\n" << std::setprecision(17);
  for (std::size_t k = 0; k < trace.size(); ++k) out << k << "," << trace[k] << "\n";
}

int run_optimize(otroll::OptimizeConfig cfg, const std::string& init, const std::string& loss,
                 const std::string& out_dir) {
  cfg.init = otroll::parse_init_kind(init);
  cfg.loss = otroll::parse_loss_kind(loss);
  const auto res = otroll::optimize(cfg);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  otroll::save_matrix((dir / "onset.otpr").string(), otroll::to_float(res.m_on));
  otroll::save_matrix((dir / "offset.otpr").string(), otroll::to_float(res.m_off));
  write_trace((dir / "trace.csv").string(), res.trace);
  otroll::write_binary_file((dir / "decoded.mid").string(), otroll::write_smf(res.decoded));
  otroll::write_binary_file((dir / "truth.mid").string(), otroll::write_smf(res.truth));
  const json report = {{"onset", to_json(res.onset_report)},
                       {"onset_offset", to_json(res.onset_offset_report)}};
  emit(report, (dir / "eval.json").string());

  const auto grid = cfg.grid();
  const auto on_assign = otroll::assign_sources(res.onset_targets, grid, cfg.params);
  json summary = {{"loss", loss},
                  {"init", init},
                  {"iterations", res.iterations},
                  {"converged", res.converged},
                  {"initial_loss", res.trace.front()},
                  {"final_loss", res.trace.back()},
                  {"final_step", res.final_step},
                  {"onset_peak_share", otroll::min_peak_share(res.m_on, res.onset_targets, on_assign)},
                  {"n_truth", res.truth.size()},
                  {"n_decoded", res.decoded.size()},
                  {"onset_f1", res.onset_report.f1},
                  {"onset_offset_f1", res.onset_offset_report.f1}};
  std::cout << summary.dump(2) << "\n";
  if (!res.converged) std::cerr << "optimize: did not reach loss tolerance\n";
  return res.converged ? 0 : 1;
}

// ---------------------------------------------------------------------- loss

int run_loss(const std::string& on_path, const std::string& off_path, const std::string& ref_path,
             GridFlags gf, const otroll::CostParams& params, double w, int bce_len,
             const std::string& out) {
  const auto m_on = otroll::to_double(otroll::load_matrix(on_path));
  const auto m_off = otroll::to_double(otroll::load_matrix(off_path));
  otroll::require_same_shape(m_on, m_off, "loss: onset vs offset prediction");
  if (m_on.cols() != static_cast<std::size_t>(gf.pitches))
    throw otroll::ShapeError("loss: prediction has " + std::to_string(m_on.cols()) +
                             " pitch columns, grid expects " + std::to_string(gf.pitches));
  gf.frames = static_cast<int>(m_on.rows());
  const auto grid = gf.grid();
  const auto smf = otroll::parse_smf(otroll::read_binary_file(ref_path));
  for (const auto& warning : smf.warnings) std::cerr << "warning: " << warning << "\n";

  const auto tgt_on = otroll::quantize_events(smf.notes, grid, otroll::EventKind::onset, w);
  const auto tgt_off = otroll::quantize_events(smf.notes, grid, otroll::EventKind::offset, w);
  const auto ot = otroll::total_loss(m_on, m_off, tgt_on, tgt_off, grid, params);
  const auto bce_on = otroll::bce_loss(m_on, otroll::pianoroll_target(smf.notes, grid, otroll::EventKind::onset, bce_len));
  const auto bce_off = otroll::bce_loss(m_off, otroll::pianoroll_target(smf.notes, grid, otroll::EventKind::offset, bce_len));

  emit({{"ot", {{"onset", to_json(ot.onset)}, {"offset", to_json(ot.offset)}, {"total", ot.total}}},
        {"bce", {{"onset", bce_on.total}, {"offset", bce_off.total}, {"total", bce_on.total + bce_off.total}}},
        {"n_notes", smf.notes.size()},
        {"clamped_events", tgt_on.n_clamped() + tgt_off.n_clamped()}},
       out);
  return 0;
}

// ---------------------------------------------------------------------- eval

int run_eval(const std::string& ref_path, const std::string& est_path, otroll::MatchParams mp,
             const std::string& out) {
  const auto ref = otroll::parse_smf(otroll::read_binary_file(ref_path)).notes;
  const auto est = otroll::parse_smf(otroll::read_binary_file(est_path)).notes;
  mp.use_offsets = false;
  const auto onset = otroll::match_notes(ref, est, mp);
  mp.use_offsets = true;
  const auto both = otroll::match_notes(ref, est, mp);

  std::cerr << std::fixed << std::setprecision(4) << "mode            P       R       F1      match/ref/est\n";
  for (const auto& [name, r] : {std::pair{"onset", &onset}, std::pair{"onset+offset", &both}})
    std::cerr << std::left << std::setw(14) << name << "  " << r->precision << "  " << r->recall << "  "
              << r->f1 << "  " << r->n_match << "/" << r->n_ref << "/" << r->n_est << "\n";
  emit({{"onset", to_json(onset)}, {"onset_offset", to_json(both)}}, out);
  return 0;
}

// ---------------------------------------------------------------------- mask

int run_mask(int bins, const otroll::HarmonicMaskParams& p, const std::string& format, const std::string& out) {
  const auto mask = otroll::harmonic_mask<float>(bins, p);
  if (format == "otpr") {
    if (out.empty()) throw otroll::ValidationError("mask: --out is required for otpr output");
    otroll::save_matrix(out, mask.bias());
    return 0;
  }
  if (format != "csv") throw otroll::ValidationError("mask: unknown format '" + format + "'");
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw otroll::Error("cannot write " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  os << std::setprecision(9);
  for (std::size_t i = 0; i < mask.n_bins(); ++i) {
    for (std::size_t j = 0; j < mask.n_bins(); ++j) os << (j ? "," : "") << mask(i, j);
    os << "\n";
  }
  return 0;
}

// --------------------------------------------------------------------- synth

int run_synth(std::uint64_t seed, std::size_t n_notes, const GridFlags& gf, int min_gap,
              std::uint32_t tpq, std::uint32_t tempo, const std::string& out) {
  const auto notes = otroll::synth_notes(seed, n_notes, gf.grid(), min_gap);
  otroll::write_binary_file(out, otroll::write_smf(notes, tpq, tempo));
  return 0;
}

// -------------------------------------------------------------------- ingest

int run_ingest(const std::string& in, bool pedal, const std::string& out) {
  const auto smf = otroll::parse_smf(otroll::read_binary_file(in));
  for (const auto& w : smf.warnings) std::cerr << "warning: " << w << "\n";
  const auto notes = pedal ? otroll::extend_offsets_with_pedal(smf.notes, smf.pedal) : smf.notes;

  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw otroll::Error("cannot write " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  os << "onset_s,offset_s,pitch,velocity\n" << std::setprecision(17);
  for (const auto& n : notes)
    os << n.onset_s << "," << n.offset_s << "," << n.pitch << "," << n.velocity.value_or(0) << "\n";
  return 0;
}

// -------------------------------------------------------------------- render

int run_render(const std::string& in, const GridFlags& gf, const std::string& which, int shift,
               double w, const std::string& out) {
  if (which != "onset" && which != "offset")
    throw otroll::ValidationError("render: --which must be onset or offset");
  const auto grid = gf.grid();
  const auto smf = otroll::parse_smf(otroll::read_binary_file(in));
  const auto targets = otroll::quantize_events(
      smf.notes, grid, which == "onset" ? otroll::EventKind::onset : otroll::EventKind::offset, w);
  otroll::MassDistribution m = grid.zeros();
  for (const auto& a : targets.atoms()) {
    const int t = std::clamp(a.frame + shift, 0, grid.n_frames() - 1);
    m(t, a.pitch) = a.mass;
  }
  otroll::save_matrix(out, otroll::to_float(m));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal-transport loss toolkit for piano transcription"};
  app.require_subcommand(1);

  GradCheckOpts gc;
  auto* grad = app.add_subcommand("grad-check", "compare analytic and finite-difference gradients");
  grad->add_option("--seeds", gc.seeds, "number of random instances")->capture_default_str();
  grad->add_option("--seed-base", gc.seed_base, "first seed")->capture_default_str();
  grad->add_option("--frames", gc.frames, "frames per instance")->capture_default_str();
  grad->add_option("--pitches", gc.pitches, "pitches per instance")->capture_default_str();
  grad->add_option("--max-atoms", gc.max_atoms, "maximum target atoms")->capture_default_str();
  grad->add_option("--eps", gc.eps, "finite-difference step")->capture_default_str();
  add_cost_flags(grad, gc.params);
  grad->add_option("--out", gc.out, "JSON report path (default stdout)");

  otroll::OptimizeConfig oc;
  std::string oc_init = "zeros", oc_loss = "ot", oc_dir;
  auto* opt = app.add_subcommand("optimize", "projected gradient descent on synthetic targets");
  opt->add_option("--seed", oc.seed)->capture_default_str();
  opt->add_option("--notes", oc.n_notes)->capture_default_str();
  opt->add_option("--frames", oc.n_frames)->capture_default_str();
  opt->add_option("--pitches", oc.n_pitches)->capture_default_str();
  opt->add_option("--lowest-pitch", oc.lowest_pitch)->capture_default_str();
  opt->add_option("--frame-period", oc.frame_period_s)->capture_default_str();
  opt->add_option("--min-gap", oc.min_gap_frames)->capture_default_str();
  opt->add_option("--step", oc.step_size)->capture_default_str();
  opt->add_option("--max-iters", oc.max_iters)->capture_default_str();
  opt->add_option("--tol", oc.loss_tolerance, "stop once total loss is below this")->capture_default_str();
  opt->add_option("--init", oc_init, "zeros|uniform|smeared|targets")->capture_default_str();
  opt->add_option("--sigma", oc.smear_sigma, "smeared init width in frames")->capture_default_str();
  opt->add_option("--loss", oc_loss, "ot|bce")->capture_default_str();
  opt->add_option("--bce-len", oc.bce_event_len, "BCE target length in frames")->capture_default_str();
  add_cost_flags(opt, oc.params);
  opt->add_option("--out-dir", oc_dir, "directory for matrices, trace, MIDI and report")->required();

  std::string l_on, l_off, l_ref, l_out;
  GridFlags l_grid;
  otroll::CostParams l_params;
  double l_w = 1.0;
  int l_bce = 2;
  auto* loss = app.add_subcommand("loss", "OT and BCE loss of prediction matrices against a MIDI reference");
  loss->add_option("--pred-on", l_on)->required();
  loss->add_option("--pred-off", l_off)->required();
  loss->add_option("--ref", l_ref)->required();
  l_grid.add(loss, false);
  add_cost_flags(loss, l_params);
  loss->add_option("--w", l_w, "target mass per note")->capture_default_str();
  loss->add_option("--bce-len", l_bce, "BCE target length in frames")->capture_default_str();
  loss->add_option("--out", l_out, "JSON path (default stdout)");

  std::string e_ref, e_est, e_out;
  otroll::MatchParams e_params;
  auto* eval = app.add_subcommand("eval", "note-level precision/recall/F1 of two MIDI files");
  eval->add_option("--ref", e_ref)->required();
  eval->add_option("--est", e_est)->required();
  eval->add_option("--onset-tol", e_params.onset_tol_s)->capture_default_str();
  eval->add_option("--offset-min-tol", e_params.offset_min_tol_s)->capture_default_str();
  eval->add_option("--offset-ratio", e_params.offset_ratio)->capture_default_str();
  eval->add_option("--out", e_out, "JSON path (default stdout)");

  int m_bins = 352;
  otroll::HarmonicMaskParams m_params;
  std::string m_format = "csv", m_out;
  auto* mask = app.add_subcommand("mask", "harmonic attention bias matrix");
  mask->add_option("--bins", m_bins)->capture_default_str();
  mask->add_option("--bpo", m_params.bins_per_octave, "bins per octave")->capture_default_str();
  mask->add_option("--max-harmonic", m_params.max_harmonic)->capture_default_str();
  mask->add_option("--tol-cents", m_params.tol_cents)->capture_default_str();
  mask->add_option("--format", m_format, "csv|otpr")->capture_default_str();
  mask->add_option("--out", m_out, "output path (csv defaults to stdout)");

  std::uint64_t s_seed = 42;
  std::size_t s_notes = 3;
  int s_gap = 4;
  std::uint32_t s_tpq = 480, s_tempo = otroll::kDefaultTempoUs;
  GridFlags s_grid;
  std::string s_out;
  auto* synth = app.add_subcommand("synth", "write random notes as a MIDI file");
  synth->add_option("--seed", s_seed)->capture_default_str();
  synth->add_option("--notes", s_notes)->capture_default_str();
  s_grid.add(synth);
  synth->add_option("--min-gap", s_gap)->capture_default_str();
  synth->add_option("--tpq", s_tpq, "ticks per quarter note")->capture_default_str();
  synth->add_option("--tempo", s_tempo, "microseconds per quarter note")->capture_default_str();
  synth->add_option("--out", s_out)->required();

  std::string i_in, i_out;
  bool i_pedal = false;
  auto* ingest = app.add_subcommand("ingest", "MIDI file to note CSV");
  ingest->add_option("--in", i_in)->required();
  ingest->add_flag("--pedal", i_pedal, "extend offsets with the sustain pedal");
  ingest->add_option("--out", i_out, "CSV path (default stdout)");

  std::string r_in, r_which = "onset", r_out;
  GridFlags r_grid;
  int r_shift = 0;
  double r_w = 1.0;
  auto* render = app.add_subcommand("render", "MIDI events to an indicator matrix file");
  render->add_option("--in", r_in)->required();
  r_grid.add(render);
  render->add_option("--which", r_which, "onset|offset")->capture_default_str();
  render->add_option("--shift", r_shift, "frames to shift every event")->capture_default_str();
  render->add_option("--w", r_w, "mass per event")->capture_default_str();
  render->add_option("--out", r_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*grad) return run_grad_check(gc);
    if (*opt) return run_optimize(oc, oc_init, oc_loss, oc_dir);
    if (*loss) return run_loss(l_on, l_off, l_ref, l_grid, l_params, l_w, l_bce, l_out);
    if (*eval) return run_eval(e_ref, e_est, e_params, e_out);
    if (*mask) return run_mask(m_bins, m_params, m_format, m_out);
    if (*synth) return run_synth(s_seed, s_notes, s_grid, s_gap, s_tpq, s_tempo, s_out);
    if (*ingest) return run_ingest(i_in, i_pedal, i_out);
    if (*render) return run_render(r_in, r_grid, r_which, r_shift, r_w, r_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
