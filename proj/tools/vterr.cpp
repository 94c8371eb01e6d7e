#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vterr/affine.hpp"
#include "vterr/io.hpp"
#include "vterr/maskops.hpp"
#include "vterr/metrics.hpp"
#include "vterr/minip.hpp"
#include "vterr/rating_server.hpp"
#include "vterr/registration.hpp"
#include "vterr/report.hpp"
#include "vterr/stats.hpp"
#include "vterr/synth.hpp"

using namespace vterr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<double> read_column(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw io::IoError("cannot open " + path.string());
  std::vector<double> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size())
          throw std::invalid_argument(tok);
        out.push_back(v);
      } catch (const std::exception &) {
        if (!first)
          throw Error(path.string() + ": not a number: " + tok);
      }
    }
    first = false;
  }
  return out;
}

json test_json(const stats::TestResult &r) {
  return {{"test", stats::to_string(r.test)},
          {"statistic", r.statistic},
          {"p_value", r.p_value},
          {"n", r.n},
          {"exact", r.exact}};
}

void print_json(const json &j) { std::cout << j.dump(2) << '\n'; }

std::string lower(std::string_view s) {
  std::string o(s);
  for (auto &c : o)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return o;
}

void add_minip(CLI::App &app) {
  auto *cmd = app.add_subcommand("minip", "Minimum intensity projection of a DSA sequence");
  static std::string in, out, phase = "full", from = "sidecar";
  static bool standardize = false;
  cmd->add_option("--in", in, "Sequence directory")->required();
  cmd->add_option("--out", out, "Output PNG")->required();
  cmd->add_option("--phase", phase, "full|arterial|capillary|venous|non_contrast");
  cmd->add_option("--phases-from", from, "sidecar|heuristic")
      ->check(CLI::IsMember({"sidecar", "heuristic"}));
  cmd->add_flag("--standardize", standardize, "Letterbox and resample to 1024x1024");
  cmd->callback([] {
    const auto seq = io::load_sequence(in);
    const auto scope = parse_phase_scope(phase);
    MinIpImage img;
    if (scope == PhaseScope::Full) {
      img = minip::compute_minip(seq);
    } else {
      minip::PhaseBoundaries b;
      if (from == "sidecar") {
        if (!seq.phase_labels)
          throw Error("sequence has no phase labels; use --phases-from heuristic");
        b.labels = *seq.phase_labels;
      } else {
        const auto est = minip::estimate_phases(seq);
        if (est.no_contrast)
          std::cerr << "warning: no contrast detected; every frame is non-contrast\n";
        b = est.boundaries;
      }
      const Phase p = parse_phase(phase);
      const auto frames = b.frames_of(p);
      if (frames.empty())
        throw Error("no frames in phase " + std::string(to_string(p)));
      img = minip::compute_minip(seq, frames, scope);
    }
    if (standardize)
      img = minip::standardize(img);
    io::write_png16(out, img.pixels);
  });
}

void add_derive(CLI::App &app) {
  auto *cmd = app.add_subcommand("derive-aca", "ACA = ICA minus MCA with morphological cleanup");
  static std::string ica, mca, out;
  static int radius = 3;
  cmd->add_option("--ica", ica)->required();
  cmd->add_option("--mca", mca)->required();
  cmd->add_option("--out", out, "Label map PNG (0 background, 1 MCA, 2 ACA)")->required();
  cmd->add_option("--radius", radius)->check(CLI::NonNegativeNumber);
  cmd->callback([] {
    const auto d = maskops::derive_label_map(io::load_binary_mask(ica), io::load_binary_mask(mca),
                                             maskops::MorphologyParams::with_radius(radius));
    if (d.aca_cleanup.empty_warning)
      std::cerr << "warning: ACA is empty after cleanup\n";
    io::save_mask(d.labels, out);
  });
}

void add_eval(CLI::App &app) {
  auto *cmd = app.add_subcommand("eval", "Overlap and surface metrics of a label map");
  static std::string pred, ref;
  static bool as_json = false;
  cmd->add_option("--pred", pred)->required();
  cmd->add_option("--ref", ref)->required();
  cmd->add_flag("--json", as_json);
  cmd->callback([] {
    const auto r = metrics::overlap_report(io::load_mask(pred), io::load_mask(ref));
    if (as_json) {
      auto j = report::to_json(r);
      j["schema_version"] = report::kSchemaVersion;
      print_json(j);
      return;
    }
    for (Territory t : {Territory::ICA, Territory::MCA}) {
      const auto &m = r.row(t);
      std::printf("%s  DSC %.4f  JI %.4f  ASD %s  HD %s%s%s\n", std::string(to_string(t)).c_str(),
                  m.dsc, m.ji, m.asd ? std::to_string(*m.asd).c_str() : "n/a",
                  m.hd ? std::to_string(*m.hd).c_str() : "n/a", m.note.empty() ? "" : "  ",
                  m.note.c_str());
    }
  });
}

void add_stats(CLI::App &app) {
  auto *cmd = app.add_subcommand("stats", "Paired tests and summaries on CSV columns");
  static std::string test, a, b, summary = "median_iqr";
  cmd->add_option("test", test, "wilcoxon|paired_t|mcnemar|chi2|summary")->required();
  cmd->add_option("--a", a, "CSV of values (0/1 outcomes for mcnemar/chi2)")->required();
  cmd->add_option("--b", b, "CSV of paired values or the second group");
  cmd->add_option("--summary", summary, "median_iqr|mean_ci95");
  cmd->callback([] {
    const auto xs = read_column(a);
    if (lower(test) == "summary") {
      const auto s = stats::summarize(xs, stats::parse_summary_kind(summary));
      print_json({{"kind", stats::to_string(s.kind)},
                  {"center", s.center},
                  {"low", s.low},
                  {"high", s.high},
                  {"n", xs.size()}});
      return;
    }
    if (b.empty())
      throw Error("--b is required for " + test);
    const auto ys = read_column(b);
    auto binary = [](const std::vector<double> &v) {
      for (double x : v)
        if (x != 0.0 && x != 1.0)
          throw Error("expected 0/1 outcomes");
    };
    stats::TestResult r;
    switch (stats::parse_test_kind(test)) {
    case stats::TestKind::Wilcoxon:
      r = stats::wilcoxon_signed_rank(xs, ys);
      break;
    case stats::TestKind::PairedT:
      r = stats::paired_t(xs, ys);
      break;
    case stats::TestKind::McNemar: {
      binary(xs);
      binary(ys);
      if (xs.size() != ys.size())
        throw Error("mcnemar needs paired outcomes of equal length");
      int bb = 0, cc = 0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        bb += xs[i] == 1.0 && ys[i] == 0.0;
        cc += xs[i] == 0.0 && ys[i] == 1.0;
      }
      r = stats::mcnemar(bb, cc);
      break;
    }
    case stats::TestKind::Chi2: {
      binary(xs);
      binary(ys);
      auto sum = [](const std::vector<double> &v) {
        return static_cast<int>(std::count(v.begin(), v.end(), 1.0));
      };
      r = stats::chi2_proportions(sum(xs), static_cast<int>(xs.size()), sum(ys),
                                  static_cast<int>(ys.size()));
      break;
    }
    }
    print_json(test_json(r));
  });
}

void add_atlas(CLI::App &app) {
  auto *cmd = app.add_subcommand("atlas-register", "Best-atlas affine registration");
  static std::string library, patient, view = "AP", out_t, out_m;
  static unsigned threads = 0;
  cmd->add_option("--library", library, "Atlas library directory")->required();
  cmd->add_option("--patient", patient, "Patient MinIP PNG")->required();
  cmd->add_option("--view", view, "AP|LATERAL");
  cmd->add_option("--out-transform", out_t)->required();
  cmd->add_option("--out-mask", out_m)->required();
  cmd->add_option("--threads", threads);
  cmd->callback([] {
    reg::RegistrationOptions opt;
    opt.threads = threads;
    MinIpImage img;
    img.pixels = io::read_png16(patient);
    if (img.pixels.width() != kStandardSize || img.pixels.height() != kStandardSize)
      img = minip::standardize(img);
    const auto lib = reg::load_atlas_library(library);
    const auto r = reg::register_best_atlas(lib, img, parse_view(view), opt);
    const auto &t = r.best.transform;
    json j{{"schema_version", report::kSchemaVersion},
           {"theta_deg", t.theta_deg},
           {"sx", t.sx},
           {"sy", t.sy},
           {"tx", t.tx},
           {"ty", t.ty},
           {"atlas_id", r.best.atlas_id},
           {"similarity", r.best.similarity},
           {"failed", r.best.failed},
           {"elapsed_seconds", r.best.elapsed_seconds}};
    std::ofstream(out_t) << j.dump(2) << '\n';
    io::save_mask(r.warped_mask, out_m);
    if (r.best.failed)
      std::cerr << "warning: registration flagged as failed (similarity " << r.best.similarity
                << ")\n";
  });
}

void add_synth(CLI::App &app) {
  auto *cmd = app.add_subcommand("synth", "Synthetic DSA phantoms, cohorts and atlas libraries");
  static synth::PhantomSpec spec;
  static std::string occl = "M1", stage = "post", view = "ap", out;
  cmd->add_option("--seed", spec.seed);
  cmd->add_option("--occlusion", occl, "ICA|M1|M2");
  cmd->add_option("--stage", stage, "pre|post");
  cmd->add_option("--view", view, "ap|lateral");
  cmd->add_option("--canvas", spec.canvas);
  cmd->add_option("--noise", spec.noise);
  cmd->add_option("--motion", spec.motion);
  cmd->add_option("--out", out);
  cmd->require_subcommand(0, 1);
  cmd->callback([cmd] {
    if (!cmd->get_subcommands().empty())
      return;
    if (out.empty())
      throw CLI::RequiredError("--out");
    spec.occlusion = parse_occlusion(occl);
    const std::string s = lower(stage);
    spec.stage = s == "pre" ? Stage::PreEvt : s == "post" ? Stage::PostEvt : parse_stage(stage);
    spec.view = parse_view(view);
    spec.patient_id = "seed" + std::to_string(spec.seed);
    const auto p = synth::generate(spec);
    const fs::path dir(out);
    io::save_sequence(p.sequence, dir / "sequence");
    io::save_mask(p.truth, dir / "truth.png");
    const auto std_case = synth::standard_case(p);
    io::write_png16(dir / "minip.png", std_case.minip.pixels);
    io::save_mask(std_case.truth, dir / "reference.png");
    std::cout << dir.string() << '\n';
  });

  auto *cohort = cmd->add_subcommand("cohort", "Cohort with references, predictions and manifest");
  static synth::CohortOptions copt;
  static std::string cout_dir;
  cohort->add_option("--n", copt.cases, "Number of acquisitions");
  cohort->add_option("--seed", copt.seed);
  cohort->add_option("--out", cout_dir)->required();
  cohort->add_flag("--phases", copt.with_phase_outputs, "Also write phase MinIPs and predictions");
  cohort->add_flag("--sequences", copt.with_sequences, "Also write the frame sequences");
  cohort->callback([] { std::cout << synth::write_cohort(copt, cout_dir).string() << '\n'; });

  auto *lib = cmd->add_subcommand("library", "Atlas library of post-treatment phantoms");
  static int count = 21;
  static std::uint64_t lib_seed = 9000;
  static std::string lib_out;
  lib->add_option("--count", count);
  lib->add_option("--seed", lib_seed);
  lib->add_option("--out", lib_out)->required();
  lib->callback([] {
    reg::save_atlas_library(synth::make_atlas_library(count, lib_seed), lib_out);
    std::cout << lib_out << '\n';
  });
}

void add_report(CLI::App &app) {
  auto *cmd = app.add_subcommand("report", "Cohort tables");
  static std::string which, manifest, config, out;
  cmd->add_option("table", which, "table1|phases|timing")
      ->required()
      ->check(CLI::IsMember({"table1", "phases", "timing"}));
  cmd->add_option("--manifest", manifest)->required();
  cmd->add_option("--config", config, "Experiment config JSON");
  cmd->add_option("--out", out)->required();
  cmd->callback([] {
    const auto m = report::load_manifest(manifest);
    const auto cfg = config.empty() ? report::ExperimentConfig{} : report::load_config(config);
    if (which == "table1") {
      const auto t = report::run_table1(m, cfg);
      report::write_outputs(t, out);
      std::cout << report::to_text(t);
    } else if (which == "phases") {
      const auto t = report::run_phase_analysis(m, cfg);
      report::write_outputs(t, out);
      std::cout << report::to_text(t);
    } else {
      const auto t = report::run_timing(m, cfg);
      report::write_outputs(t, out);
      std::cout << report::to_text(t);
    }
  });
}

void add_split(CLI::App &app) {
  auto *cmd = app.add_subcommand("split", "Patient-level stratified split of a manifest");
  static std::string manifest, out;
  static report::SplitFractions f;
  static std::uint64_t seed = 0;
  cmd->add_option("--manifest", manifest)->required();
  cmd->add_option("--out", out, "Output manifest (paths are rewritten relative to it)")
      ->required();
  cmd->add_option("--train", f.train);
  cmd->add_option("--val", f.val);
  cmd->add_option("--test", f.test);
  cmd->add_option("--seed", seed);
  cmd->callback([] {
    auto r = report::split_cohort(report::load_manifest(manifest), f, seed);
    for (const auto &w : r.warnings)
      std::cerr << "warning: " << w << '\n';
    const fs::path dst = fs::absolute(out);
    for (auto &c : r.manifest.cases) {
      auto rebase = [&](std::string &p) {
        if (!p.empty())
          p = fs::relative(r.manifest.resolve(p), dst.parent_path()).string();
      };
      rebase(c.sequence_dir);
      rebase(c.minip);
      rebase(c.reference);
      for (auto &[k, v] : c.predictions)
        rebase(v);
      for (auto &[k, v] : c.phase_minips)
        rebase(v);
      for (auto &[k, v] : c.phase_predictions)
        rebase(v);
    }
    report::save_manifest(r.manifest, dst);
    std::map<report::Split, int> n;
    for (const auto &[p, s] : r.manifest.splits)
      ++n[s];
    for (const auto &[s, k] : n)
      std::cout << report::to_string(s) << ' ' << k << " patients\n";
  });
}

void add_serve(CLI::App &app) {
  auto *cmd = app.add_subcommand("serve", "Rating service over HTTP");
  static rating::ServerOptions opt;
  cmd->add_option("--data", opt.data_dir, "Directory for session logs")->required();
  cmd->add_option("--host", opt.host);
  cmd->add_option("--port", opt.port);
  cmd->callback([] {
    rating::RatingServer server(opt);
    const int port = server.bind();
    std::cout << "listening on " << opt.host << ':' << port << " with "
              << server.session_count() << " sessions" << std::endl;
    server.listen();
  });
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Vascular territory segmentation toolkit"};
  app.require_subcommand(1);
  add_minip(app);
  add_derive(app);
  add_eval(app);
  add_stats(app);
  add_atlas(app);
  add_synth(app);
  add_report(app);
  add_split(app);
  add_serve(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
