#include "cli/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cli/config.hpp"
#include "densedet/dataio.hpp"
#include "densedet/error.hpp"
#include "densedet/metrics.hpp"
#include "densedet/parallel.hpp"
#include "densedet/report.hpp"
#include "densedet/trainkit.hpp"

namespace densedet::cli {

namespace {

using nlohmann::json;

std::string fixed(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

// Ground truth of the named category plus detections restricted to it.
// Detections on images or categories the annotation file does not know are
// a schema mismatch.
struct EvalInputs {
  std::vector<GroundTruthBox> gts;
  std::vector<Detection> dets;
};

EvalInputs load_eval_inputs(const std::string& gt_path, const std::string& dets_path, const std::string& category) {
  const CocoDataset ds = parse_coco(read_text_file(gt_path));
  std::vector<Detection> all = read_detections(read_text_file(dets_path));

  std::int64_t cat = 0;
  if (auto id = ds.category_id(category)) {
    cat = *id;
  } else if (ds.categories.size() == 1) {
    cat = ds.categories.front().id;
  } else {
    fail_input("unknown category '" + category + "' in " + gt_path);
  }

  std::set<std::int64_t> images, cats;
  for (const auto& im : ds.images) images.insert(im.id);
  for (const auto& c : ds.categories) cats.insert(c.id);

  EvalInputs in;
  in.gts = ground_truth(ds, cat);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Detection& d = all[i];
    if (!images.count(d.image_id))
      fail_input("schema mismatch: detection " + std::to_string(i) + " references unknown image_id " +
                 std::to_string(d.image_id));
    if (!cats.count(d.category_id))
      fail_input("schema mismatch: detection " + std::to_string(i) + " references unknown category_id " +
                 std::to_string(d.category_id));
    if (d.category_id == cat) in.dets.push_back(d);
  }
  return in;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail_io("cannot create directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      fail_input("--seeds: expected a comma-separated list of non-negative integers");
    out.push_back(std::stoull(item));
  }
  if (out.empty()) fail_input("--seeds: empty list");
  return out;
}

ApSummary summary_from_json(const json& j, const std::string& where) {
  auto field = [&](const char* key) -> double {
    if (!j.contains(key)) return kNoGroundTruth;
    const json& v = j.at(key);
    if (v.is_null()) return kNoGroundTruth;
    if (!v.is_number()) fail_input(where + "." + key + ": expected a number");
    return v.get<double>();
  };
  if (!j.is_object()) fail_input(where + ": expected an object");
  ApSummary s;
  s.ap = field("AP");
  s.ap50 = field("AP50");
  s.ap75 = field("AP75");
  s.ap_small = field("APs");
  s.ap_medium = field("APm");
  s.ap_large = field("APl");
  s.ar = field("AR");
  return s;
}

json parse_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail_input(path + ": malformed JSON at byte " + std::to_string(e.byte));
  }
}

// ---------------------------------------------------------------- commands

struct ExtractArgs {
  std::string annotations, category = "person", out;
  int min_instances = 1;
  std::size_t max_images = 0;
  std::uint64_t seed = 0;
};

int cmd_extract_subset(const ExtractArgs& a, std::ostream& out) {
  const CocoDataset ds = parse_coco(read_text_file(a.annotations));
  SubsetSpec spec;
  spec.category_name = a.category;
  spec.min_instances = a.min_instances;
  if (a.max_images > 0) spec.max_images = a.max_images;
  spec.seed = a.seed;
  const CocoDataset sub = extract_person_subset(ds, spec);
  write_text_file(a.out, serialize_coco(sub));
  out << "images=" << sub.images.size() << " annotations=" << sub.annotations.size() << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string gt, dets, category = "person", format = "text";
  double iou_min = 0.5, iou_max = 0.95, iou_step = 0.05;
  std::size_t max_dets = 100;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const EvalInputs in = load_eval_inputs(a.gt, a.dets, a.category);
  EvalOptions opt;
  opt.iou_thresholds = EvalOptions::iou_sweep(a.iou_min, a.iou_max, a.iou_step);
  opt.max_dets_per_image = a.max_dets;
  const ApSummary s = coco_summary(in.dets, in.gts, opt);
  if (a.format == "csv") {
    out << kSummaryCsvHeader << ",AR\n" << summary_row(s, ',') << ',' << format_percent(s.ar) << '\n';
  } else {
    out << render_evaluation(s);
  }
  return 0;
}

struct RocArgs {
  std::string gt, dets, category = "person", out;
  double iou = 0.5;
};

int cmd_roc(const RocArgs& a, std::ostream& out) {
  const EvalInputs in = load_eval_inputs(a.gt, a.dets, a.category);
  const RocCurve curve = roc_auc(in.dets, in.gts, a.iou);
  write_text_file(a.out, render_roc_csv(curve));
  out << "auc=" << fixed("%.6f", curve.auc) << '\n';
  out << "best_accuracy=" << fixed("%.6f", curve.best_accuracy) << '\n';
  return 0;
}

struct GradcheckArgs {
  std::uint64_t seed = 0;
  int seeds = 100;
  std::string corrupt;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  AuditOptions opt;
  opt.seed = a.seed;
  opt.seeds = a.seeds;
  opt.corrupt_check = a.corrupt;
  if (opt.seeds < 1) fail_input("--seeds must be >= 1");
  const auto checks = run_gradient_audit(opt);
  std::vector<std::string> failed;
  for (const auto& c : checks) {
    out << c.name << " max_rel_error=" << fixed("%.3e", c.max_rel_error) << " threshold=" << fixed("%.0e", c.threshold)
        << " checked=" << c.checked << " skipped=" << c.skipped << ' ' << (c.passed() ? "PASS" : "FAIL") << '\n';
    if (!c.passed()) failed.push_back(c.name);
  }
  if (!failed.empty()) {
    std::string names;
    for (const auto& n : failed) names += (names.empty() ? "" : ", ") + n;
    err << "gradient check failed: " << names << '\n';
    return static_cast<int>(ErrorKind::Verification);
  }
  return 0;
}

struct TrainArgs {
  std::string config, out_dir;
  bool paired = false;
  std::string seeds;
};

void write_run(const std::string& dir, const std::string& stem, const RunReport& r) {
  write_text_file(join_path(dir, stem + ".json"), to_json(r).dump(2) + "\n");
  write_text_file(join_path(dir, stem == "report" ? "losses.csv" : stem + "_losses.csv"), loss_csv(r));
}

int cmd_train_toy(const TrainArgs& a, std::ostream& out) {
  CliConfig cfg = a.config.empty() ? CliConfig{} : load_config(a.config);
  if (!a.seeds.empty()) cfg.paired_seeds = parse_seed_list(a.seeds);
  ensure_dir(a.out_dir);

  const auto train = make_scenes(cfg.data, false);
  const auto val = make_scenes(cfg.data, true);

  if (!a.paired) {
    const TrainOutcome run = train_toy_detector(cfg.train, train, val);
    write_run(a.out_dir, "report", run.report);
    out << render_table(cfg.train.with_dense_head ? "toy detector with dense pooling" : "toy detector without dense pooling",
                        run.report.final_summary);
    return 0;
  }

  double sum_plain = 0.0, sum_dense = 0.0;
  const double n = static_cast<double>(cfg.paired_seeds.size());
  json index = json::array();
  for (std::uint64_t seed : cfg.paired_seeds) {
    TrainConfig plain = cfg.train, dense = cfg.train;
    plain.seed = dense.seed = seed;
    plain.with_dense_head = false;
    dense.with_dense_head = true;
    const RunReport rp = train_toy_detector(plain, train, val).report;
    const RunReport rd = train_toy_detector(dense, train, val).report;
    const std::string sp = "report_seed" + std::to_string(seed) + "_plain";
    const std::string sd = "report_seed" + std::to_string(seed) + "_dense";
    write_run(a.out_dir, sp, rp);
    write_run(a.out_dir, sd, rd);
    index.push_back({{"seed", seed}, {"plain", sp + ".json"}, {"dense", sd + ".json"}});
    out << "seed " << seed << '\n'
        << render_comparison({"plain", rp.final_summary}, {"dense", rd.final_summary});
    sum_plain += rp.final_summary.ap;
    sum_dense += rd.final_summary.ap;
  }
  const double mp = sum_plain / n, md = sum_dense / n;
  write_text_file(join_path(a.out_dir, "paired.json"),
                  json{{"runs", index}, {"mean_ap_plain", mp}, {"mean_ap_dense", md}}.dump(2) + "\n");
  out << "mean AP plain=" << fixed("%.4f", mp) << " dense=" << fixed("%.4f", md)
      << " delta=" << format_delta(md - mp) << '\n';
  return 0;
}

struct RenderArgs {
  std::string tables;
  std::string format = "text";
};

// Paper-style tables from a JSON fixture: {"tables": [{"name", "title",
// "row": [six percentages]}], "comparisons": [{"a", "b"}], "values": [...]}.
int cmd_render(const RenderArgs& a, std::ostream& out) {
  const json j = parse_json_file(a.tables);
  if (!j.is_object() || !j.contains("tables") || !j.at("tables").is_array())
    fail_input(a.tables + ": expected an object with a 'tables' array");

  std::map<std::string, ApSummary> by_name;
  std::vector<ApSummary> rows;
  std::string text;
  std::size_t i = 0;
  for (const auto& t : j.at("tables")) {
    const std::string where = "$.tables[" + std::to_string(i++) + "]";
    if (!t.is_object() || !t.contains("row") || !t.at("row").is_array() || t.at("row").size() != 6)
      fail_input(a.tables + ": " + where + ".row must hold six numbers");
    std::vector<double> v;
    for (const auto& x : t.at("row")) {
      if (!x.is_number()) fail_input(a.tables + ": " + where + ".row must hold six numbers");
      v.push_back(x.get<double>());
    }
    const ApSummary s = ApSummary::from_percent(v[0], v[1], v[2], v[3], v[4], v[5]);
    const std::string name = t.value("name", "table" + std::to_string(i));
    by_name[name] = s;
    rows.push_back(s);
    if (!text.empty()) text += '\n';
    text += render_table(t.value("title", name), s);
  }

  if (a.format == "csv") {
    out << render_csv(rows);
    return 0;
  }
  out << text;

  if (j.contains("comparisons")) {
    for (const auto& c : j.at("comparisons")) {
      const std::string an = c.value("a", ""), bn = c.value("b", "");
      if (!by_name.count(an) || !by_name.count(bn)) fail_input(a.tables + ": comparison names an unknown table");
      out << '\n' << render_comparison({an, by_name[an]}, {bn, by_name[bn]});
    }
  }
  if (j.contains("values")) {
    out << "\nmodel backbone type value\n";
    for (const auto& v : j.at("values")) {
      out << v.value("model", "") << ' ' << v.value("backbone", 0) << ' ' << v.value("type", "") << ' '
          << fixed("%.1f", v.value("value", 0.0)) << '\n';
    }
  }
  return 0;
}

struct CompareArgs {
  std::string a, b, name_a = "a", name_b = "b";
};

// Either file may be a run report (final_summary is used) or a bare summary.
int cmd_compare(const CompareArgs& a, std::ostream& out) {
  auto load = [](const std::string& path) {
    const json j = parse_json_file(path);
    if (j.is_object() && j.contains("final_summary")) return summary_from_json(j.at("final_summary"), path + ": $.final_summary");
    return summary_from_json(j, path + ": $");
  };
  out << render_comparison({a.name_a, load(a.a)}, {a.name_b, load(a.b)});
  return 0;
}

struct ConfigArgs {
  std::string path;
};

int cmd_default_config(const ConfigArgs& a, std::ostream& out) {
  const std::string text = default_config_json().dump(2) + "\n";
  if (a.path.empty())
    out << text;
  else
    write_text_file(a.path, text);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Person detection with a dense surface-embedding head: data tools, evaluation and a toy trainer",
               "densedet"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "densedet 1.0.0");

  int threads = -1;
  app.add_option("--threads", threads, "Worker threads for parallel kernels (0 = auto; overrides DENSEDET_THREADS)")
      ->check(CLI::NonNegativeNumber);

  ExtractArgs ex;
  auto* sub_ex = app.add_subcommand("extract-subset", "Keep images with enough instances of one category");
  sub_ex->add_option("--annotations", ex.annotations, "COCO annotation file")->required();
  sub_ex->add_option("--category", ex.category, "Category name");
  sub_ex->add_option("--min-instances", ex.min_instances, "Minimum instances per kept image")->check(CLI::PositiveNumber);
  sub_ex->add_option("--max-images", ex.max_images, "Keep a seeded random sample of at most N images (0 = all)");
  sub_ex->add_option("--seed", ex.seed, "Sampling seed");
  sub_ex->add_option("--out", ex.out, "Output annotation file")->required();

  EvaluateArgs ev;
  auto* sub_ev = app.add_subcommand("evaluate", "COCO-style AP summary of a detection file");
  sub_ev->add_option("--gt", ev.gt, "COCO annotation file")->required();
  sub_ev->add_option("--dets", ev.dets, "COCO results file")->required();
  sub_ev->add_option("--category", ev.category, "Category to evaluate (the only one if the file has one)");
  sub_ev->add_option("--iou-min", ev.iou_min, "First IoU threshold");
  sub_ev->add_option("--iou-max", ev.iou_max, "Last IoU threshold");
  sub_ev->add_option("--iou-step", ev.iou_step, "IoU threshold step");
  sub_ev->add_option("--max-dets", ev.max_dets, "Detections kept per image");
  sub_ev->add_option("--format", ev.format, "Output format")->check(CLI::IsMember({"text", "csv"}));

  RocArgs rc;
  auto* sub_rc = app.add_subcommand("roc", "ROC curve over detections and its area");
  sub_rc->add_option("--gt", rc.gt, "COCO annotation file")->required();
  sub_rc->add_option("--dets", rc.dets, "COCO results file")->required();
  sub_rc->add_option("--category", rc.category, "Category to evaluate (the only one if the file has one)");
  sub_rc->add_option("--iou", rc.iou, "IoU threshold for a true positive");
  sub_rc->add_option("--out", rc.out, "Output CSV")->required();

  GradcheckArgs gc;
  auto* sub_gc = app.add_subcommand("gradcheck", "Finite-difference audit of every manual gradient");
  sub_gc->add_option("--seed", gc.seed, "Base seed");
  sub_gc->add_option("--seeds", gc.seeds, "Random instances per check");
  sub_gc->add_option("--corrupt", gc.corrupt, "Perturb one check's analytic gradient")->group("");

  TrainArgs tr;
  auto* sub_tr = app.add_subcommand("train-toy", "Train the toy detector on synthetic scenes");
  sub_tr->add_option("--config", tr.config, "JSON config (all keys optional)");
  sub_tr->add_option("--out", tr.out_dir, "Output directory")->required();
  sub_tr->add_flag("--paired", tr.paired, "Train with and without the dense head for each seed");
  sub_tr->add_option("--seeds", tr.seeds, "Comma-separated seeds for --paired (default: config paired_seeds)");

  RenderArgs rd;
  auto* sub_rd = app.add_subcommand("render", "Render summary tables from a JSON file of rows");
  sub_rd->add_option("--tables", rd.tables, "Tables JSON")->required();
  sub_rd->add_option("--format", rd.format, "Output format")->check(CLI::IsMember({"text", "csv"}));

  CompareArgs cp;
  auto* sub_cp = app.add_subcommand("compare", "Side-by-side summaries of two runs and their difference");
  sub_cp->add_option("--a", cp.a, "First run report or summary JSON")->required();
  sub_cp->add_option("--b", cp.b, "Second run report or summary JSON")->required();
  sub_cp->add_option("--name-a", cp.name_a, "Label of the first row");
  sub_cp->add_option("--name-b", cp.name_b, "Label of the second row");

  ConfigArgs dc;
  auto* sub_dc = app.add_subcommand("default-config", "Print the default train-toy config");
  sub_dc->add_option("--out", dc.path, "Write to this file instead of stdout");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return static_cast<int>(ErrorKind::Input);
  }

  try {
    if (threads >= 0) set_thread_count(threads);
    if (sub_ex->parsed()) return cmd_extract_subset(ex, out);
    if (sub_ev->parsed()) return cmd_evaluate(ev, out);
    if (sub_rc->parsed()) return cmd_roc(rc, out);
    if (sub_gc->parsed()) return cmd_gradcheck(gc, out, err);
    if (sub_tr->parsed()) return cmd_train_toy(tr, out);
    if (sub_rd->parsed()) return cmd_render(rd, out);
    if (sub_cp->parsed()) return cmd_compare(cp, out);
    if (sub_dc->parsed()) return cmd_default_config(dc, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Input);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Input);
  }
  return static_cast<int>(ErrorKind::Input);
}

}  // namespace densedet::cli
