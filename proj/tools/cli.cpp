#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hicomp/hicomp.hpp"

namespace hicomp::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

Size2 parse_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    Size2 s{std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
    if (s.height <= 0 || s.width <= 0) throw std::invalid_argument(text);
    return s;
  } catch (const std::logic_error&) {
    throw InvalidArgument("--size must look like HEIGHTxWIDTH, got \"" + text + "\"");
  }
}

// Either an inline JSON object or a path to a JSON file.
WarpParams load_warp(const std::string& arg) {
  if (!arg.empty() && arg.front() == '{') return warp_from_json(json::parse(arg));
  const auto bytes = read_file(arg);
  return warp_from_json(json::parse(bytes.begin(), bytes.end()));
}

// Writes the report to `report_path`, or to `out` when no path is given.
// Returns true when a file was written and a short summary may follow on `out`.
bool emit_json(const json& doc, const std::string& report_path, std::ostream& out) {
  if (report_path.empty()) {
    out << doc.dump(2) << "\n";
    return false;
  }
  const auto text = doc.dump(2) + "\n";
  write_file(report_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return true;
}

struct ComposeArgs {
  std::string scene;
  std::string out;
  std::string emit_mask;
  std::string filter_input;
  std::string filter_out;
  int radius = 16;
  double eps = 1e-7;
  std::size_t max_foregrounds = 6;
};

int run_compose(const ComposeArgs& a, std::ostream& out) {
  if (!a.filter_input.empty() && a.filter_out.empty()) throw InvalidArgument("--filter requires --filter-out");
  const FilterConfig filter_cfg{a.radius, a.eps};
  filter_cfg.validate();
  const HierarchyConfig cfg{a.max_foregrounds};
  const auto spec = load_scene(a.scene, cfg);
  const auto composite = compose_scene(spec, cfg);
  save_image(a.out, composite.image);
  out << "composite: " << a.out << "\n";
  if (!a.emit_mask.empty()) {
    save_mask(a.emit_mask, composite.combined_mask);
    out << "mask: " << a.emit_mask << "\n";
  }
  if (!a.filter_input.empty()) {
    const auto appearance = load_image(a.filter_input);
    const auto filtered = guided_filter(composite.image, appearance, filter_cfg);
    save_image(a.filter_out, filtered);
    out << "filtered: " << a.filter_out << "\n";
  }
  return kOk;
}

struct WarpArgs {
  std::string in;
  std::string warp;
  std::string out;
  std::string size;
  bool mask = false;
};

int run_warp(const WarpArgs& a, std::ostream& out) {
  const auto params = load_warp(a.warp);
  if (a.mask) {
    const auto m = load_mask(a.in);
    const Size2 size = a.size.empty() ? Size2{m.height(), m.width()} : parse_size(a.size);
    save_mask(a.out, warp_image(m, params, size));
  } else {
    const auto img = load_image(a.in);
    const Size2 size = a.size.empty() ? Size2{img.height(), img.width()} : parse_size(a.size);
    save_image(a.out, warp_image(img, params, size));
  }
  out << "warped: " << a.out << "\n";
  return kOk;
}

struct FilterArgs {
  std::string guide;
  std::string input;
  std::string out;
  int radius = 16;
  double eps = 1e-7;
};

int run_filter(const FilterArgs& a, std::ostream& out) {
  const FilterConfig cfg{a.radius, a.eps};
  cfg.validate();
  const auto guide = load_image(a.guide);
  const auto input = load_image(a.input);
  save_image(a.out, guided_filter(guide, input, cfg));
  out << "filtered: " << a.out << "\n";
  return kOk;
}

struct DemoArgs {
  std::uint64_t seed = 0;
  std::size_t m = 3;
  int size = 64;
  std::size_t steps = 500;
  double lr = 0.5;
  std::string report;
  std::vector<double> eps{1e-7, 1e-4, 1e-2, 1.0};
  int radius = 16;
};

int run_demo_hierarchy(const DemoArgs& a, std::ostream& out) {
  const auto scene = generate_scene(a.seed, a.m, a.size);
  const auto r = recover_hierarchy(scene, a.steps, a.lr);
  auto doc = report_to_json(r);
  doc["demo"] = "hierarchy";
  doc["seed"] = a.seed;
  if (emit_json(doc, a.report, out))
    out << "recovered_order_index " << r.recovered_order_index << " (ground truth " << r.gt_order_index << ")\n";
  return kOk;
}

int run_demo_warp(const DemoArgs& a, std::ostream& out) {
  const auto scene = generate_scene(a.seed, a.m, a.size);
  const auto r = recover_warp(scene, a.steps, a.lr);
  auto doc = report_to_json(r);
  doc["demo"] = "warp-recovery";
  doc["seed"] = a.seed;
  nlohmann::json gt = nlohmann::json::array();
  for (const auto& w : scene.gt_warps) gt.push_back(warp_to_json(w));
  doc["gt_warps"] = gt;
  if (emit_json(doc, a.report, out)) out << "warp_error " << r.warp_error << "\n";
  return kOk;
}

int run_demo_gradcheck(const DemoArgs& a, std::ostream& out) {
  const auto scene = generate_scene(a.seed, a.m, a.size);
  const auto g = check_logit_gradient(scene, a.seed);
  const json doc{{"demo", "gradcheck"},
                 {"seed", a.seed},
                 {"m", a.m},
                 {"logits", g.logits},
                 {"analytic", g.analytic},
                 {"numeric", g.numeric},
                 {"max_relative_discrepancy", g.max_relative_discrepancy},
                 {"within_tolerance", g.max_relative_discrepancy < 1e-4}};
  if (emit_json(doc, a.report, out)) out << "max_relative_discrepancy " << g.max_relative_discrepancy << "\n";
  return kOk;
}

int run_demo_filter_sweep(const DemoArgs& a, std::ostream& out) {
  const auto scene = generate_scene(a.seed, a.m, a.size);
  const auto input = appearance_input(scene.gt_composite);
  const auto rows = filter_sweep(scene.gt_composite, input, a.radius, a.eps);
  json table = json::array();
  bool monotone = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    table.push_back({{"eps", rows[i].eps}, {"output_variance", rows[i].output_variance}});
    if (i > 0 && rows[i].output_variance > rows[i - 1].output_variance) monotone = false;
  }
  const json doc{{"demo", "filter-sweep"}, {"seed", a.seed},          {"radius", a.radius},
                 {"rows", table},          {"monotone_non_increasing", monotone}};
  if (emit_json(doc, a.report, out))
    for (const auto& r : rows) out << "eps " << r.eps << " variance " << r.output_variance << "\n";
  return kOk;
}

void add_demo_options(CLI::App* cmd, DemoArgs& a) {
  cmd->add_option("--seed", a.seed, "scene seed")->capture_default_str();
  cmd->add_option("--m", a.m, "number of foregrounds")->capture_default_str();
  cmd->add_option("--size", a.size, "canvas side in pixels")->capture_default_str();
  cmd->add_option("--report", a.report, "write the JSON report here instead of stdout");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-object image composition engine", "hicomp"};
  app.require_subcommand(1);

  ComposeArgs compose;
  auto* c = app.add_subcommand("compose", "warp and compose a scene document");
  c->add_option("--scene", compose.scene, "scene JSON")->required();
  c->add_option("--out", compose.out, "composite PNG")->required();
  c->add_option("--emit-mask", compose.emit_mask, "also write the combined mask PNG");
  c->add_option("--filter", compose.filter_input, "appearance PNG to filter with the composite as guide");
  c->add_option("--filter-out", compose.filter_out, "filtered output PNG");
  c->add_option("--radius", compose.radius, "guided filter radius")->capture_default_str();
  c->add_option("--eps", compose.eps, "guided filter regularization")->capture_default_str();
  c->add_option("--max-foregrounds", compose.max_foregrounds, "cap on M")->capture_default_str();

  WarpArgs warp;
  auto* w = app.add_subcommand("warp", "apply a parametric warp to an image or mask");
  w->add_option("--in", warp.in, "input PNG")->required();
  w->add_option("--warp", warp.warp, "warp JSON file or inline JSON object")->required();
  w->add_option("--out", warp.out, "output PNG")->required();
  w->add_option("--size", warp.size, "output HEIGHTxWIDTH (default: input size)");
  w->add_flag("--mask", warp.mask, "treat the input as a grayscale mask");

  FilterArgs filter;
  auto* f = app.add_subcommand("filter", "guided filter");
  f->add_option("--guide", filter.guide, "guide PNG (detail source)")->required();
  f->add_option("--input", filter.input, "input PNG (appearance source)")->required();
  f->add_option("--out", filter.out, "output PNG")->required();
  f->add_option("--radius", filter.radius, "window radius")->capture_default_str();
  f->add_option("--eps", filter.eps, "regularization")->capture_default_str();

  auto* demo = app.add_subcommand("demo", "desk-scale recovery demos");
  demo->require_subcommand(1);

  DemoArgs hier;
  auto* dh = demo->add_subcommand("hierarchy", "recover the occlusion order by gradient descent on logits");
  add_demo_options(dh, hier);
  dh->add_option("--steps", hier.steps)->capture_default_str();
  dh->add_option("--lr", hier.lr)->capture_default_str();

  DemoArgs wr;
  wr.m = 1;
  wr.steps = 400;
  wr.lr = 0.3;
  auto* dw = demo->add_subcommand("warp-recovery", "recover foreground translations");
  add_demo_options(dw, wr);
  dw->add_option("--steps", wr.steps)->capture_default_str();
  dw->add_option("--lr", wr.lr)->capture_default_str();

  DemoArgs gc;
  gc.m = 2;
  auto* dg = demo->add_subcommand("gradcheck", "analytic vs central-difference logit gradients");
  add_demo_options(dg, gc);

  DemoArgs sweep;
  auto* ds = demo->add_subcommand("filter-sweep", "output variance of the guided filter across eps");
  add_demo_options(ds, sweep);
  ds->add_option("--eps", sweep.eps, "comma-separated eps values")->delimiter(',')->capture_default_str();
  ds->add_option("--radius", sweep.radius)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  }

  try {
    if (*c) return run_compose(compose, out);
    if (*w) return run_warp(warp, out);
    if (*f) return run_filter(filter, out);
    if (*dh) return run_demo_hierarchy(hier, out);
    if (*dw) return run_demo_warp(wr, out);
    if (*dg) return run_demo_gradcheck(gc, out);
    if (*ds) return run_demo_filter_sweep(sweep, out);
    err << "error: no command given\n";
    return kInvalidInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidInput;
  }
}

}  // namespace hicomp::cli
