// mtpano: panoramic supervision toolkit.
//
// Exit status: 0 success, 1 runtime failure (I/O, parse, data, failed checks),
// 2 usage error. Reports go to stdout as JSON; errors go to stderr as JSON.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtpano/aux_labels.hpp"
#include "mtpano/codec.hpp"
#include "mtpano/config.hpp"
#include "mtpano/gradcheck.hpp"
#include "mtpano/metrics.hpp"
#include "mtpano/pipeline.hpp"
#include "mtpano/prompt.hpp"
#include "mtpano/selftest.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mtpano;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalFlags {
  std::string config_path;
  std::optional<int> jobs;
  bool emit_vis = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> root;
  std::vector<std::string> set;  // key=value overrides
};

ToolConfig resolve_config(const GlobalFlags& g) {
  ToolConfig c;
  if (!g.config_path.empty()) c = load_config(g.config_path);
  for (const auto& kv : g.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.jobs) c.jobs = *g.jobs;
  if (g.seed) c.seed = *g.seed;
  if (g.root) c.root = *g.root;
  if (g.emit_vis) c.emit_vis = true;
  c.loss_weights.validate();
  return c;
}

std::vector<std::string> select_panos(const ToolConfig& c, const std::vector<std::string>& ids) {
  if (!ids.empty()) return ids;
  std::vector<std::string> out;
  for (const auto& id : layout::list_panos(c.root))
    if (fs::exists(layout::manifest(c.root, id)) || fs::exists(layout::pano_input(c.root, id, Task::Rgb))) out.push_back(id);
  return out;
}

json errors_json(const std::vector<CropError>& errors, const std::vector<std::string>& names) {
  json arr = json::array();
  for (const auto& e : errors) arr.push_back({{"item", names.empty() ? std::to_string(e.index) : names[e.index]}, {"message", e.message}});
  return arr;
}

// Jet-like ramp for inspection images.
Vec3<double> ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return {255 * std::clamp(1.5 - std::abs(4 * t - 3), 0.0, 1.0), 255 * std::clamp(1.5 - std::abs(4 * t - 2), 0.0, 1.0),
          255 * std::clamp(1.5 - std::abs(4 * t - 1), 0.0, 1.0)};
}

PngImage colorize(const Plane<double>& v, const Mask* valid) {
  const int h = static_cast<int>(v.rows()), w = static_cast<int>(v.cols());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!valid || (*valid)(y, x)) lo = std::min(lo, v(y, x)), hi = std::max(hi, v(y, x));
  PngImage img = make_png(w, h, 3, 8);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (valid && !(*valid)(y, x)) continue;
      const Vec3<double> c = ramp(hi > lo ? (v(y, x) - lo) / (hi - lo) : 0.0);
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = static_cast<std::uint16_t>(std::lround(c[ch]));
    }
  return img;
}

PngImage normal_vis(const Raster& n, const Mask& valid) {
  PngImage img = make_png(n.width(), n.height(), 3, 8);
  for (int y = 0; y < n.height(); ++y)
    for (int x = 0; x < n.width(); ++x)
      if (valid(y, x))
        for (int ch = 0; ch < 3; ++ch)
          img.at(y, x, ch) = static_cast<std::uint16_t>(std::lround(std::clamp((n.planes[ch](y, x) + 1) * 127.5, 0.0, 255.0)));
  return img;
}

void emit_report(const json& j) { std::cout << j.dump(2) << "\n"; }

// ---------------------------------------------------------------------------------------

int cmd_sample_poses(const ToolConfig& c, std::optional<int> n, const std::vector<std::string>& ids,
                     const std::string& out) {
  const int count = n.value_or(c.crop_count);
  if (!out.empty()) {
    const std::string id = ids.empty() ? "pano" : ids.front();
    write_manifest(out, sample_camera_poses(count, c.seed, c.ranges, id, c.pano_width, c.pano_height));
    emit_report({{"manifests", json::array({out})}, {"crops", count}});
    return 0;
  }
  std::vector<std::string> panos = ids;
  if (panos.empty())
    for (const auto& id : layout::list_panos(c.root)) panos.push_back(id);
  if (panos.empty()) throw IoError("no panoramas under " + c.root.string());
  std::vector<std::string> written(panos.size());
  const auto errors = run_work_queue(static_cast<int>(panos.size()), c.resolved_jobs(), [&](int i) {
    const std::string& id = panos[i];
    int w = c.pano_width, h = c.pano_height;
    const fs::path rgb = layout::pano_input(c.root, id, Task::Rgb);
    if (fs::exists(rgb)) {
      const PngImage img = read_png(rgb);
      w = img.width;
      h = img.height;
    }
    const auto path = layout::manifest(c.root, id);
    write_manifest(path, sample_camera_poses(count, derive_seed(c.seed, id), c.ranges, id, w, h));
    written[i] = path.string();
  });
  json j = {{"manifests", written}, {"crops", count}, {"errors", errors_json(errors, panos)}};
  emit_report(j);
  return errors.empty() ? 0 : 1;
}

int cmd_extract(const ToolConfig& c, const std::vector<std::string>& ids, std::vector<std::string> tasks) {
  if (tasks.empty()) tasks = {"rgb"};
  const auto panos = select_panos(c, ids);
  std::mutex mu;
  json per_pano = json::object();
  const auto errors = run_work_queue(static_cast<int>(panos.size()), c.resolved_jobs(), [&](int i) {
    const std::string& id = panos[i];
    std::vector<std::string> warnings;
    const CropManifest m = read_manifest(layout::manifest(c.root, id), &warnings);
    int written = 0;
    for (const auto& tname : tasks) {
      const Task task = task_from_string(tname);
      const fs::path src = layout::pano_input(c.root, id, task);
      const ErpImage pano(decode_task(read_png(src), task));
      if (pano.width() != m.pano_width || pano.height() != m.pano_height)
        throw DataError(src.string() + " does not match manifest panorama size");
      for (const CropPose& crop : m.crops) {
        const PatchSample s = extract_patch(pano, crop.camera(), task, id);
        write_png(layout::crop(c.root, id, crop.index, task), encode_task(s.payload, task, s.valid));
        ++written;
      }
    }
    std::lock_guard lock(mu);
    per_pano[id] = {{"crops_written", written}, {"warnings", warnings}};
  });
  emit_report({{"panos", per_pano}, {"errors", errors_json(errors, panos)}});
  return errors.empty() ? 0 : 1;
}

int cmd_reproject(const ToolConfig& c, const std::vector<std::string>& ids, const std::string& task_name) {
  const Task task = task_from_string(task_name);
  const auto panos = select_panos(c, ids);
  std::mutex mu;
  json per_pano = json::object();
  bool crop_failures = false;
  const auto errors = run_work_queue(static_cast<int>(panos.size()), c.resolved_jobs(), [&](int i) {
    const std::string& id = panos[i];
    const CropManifest m = read_manifest(layout::manifest(c.root, id));
    const IngestResult r = ingest_predictions(m, c.root, task);
    double covered = 0;
    Mask any = Mask::Constant(m.pano_height, m.pano_width, false);
    for (const auto& l : r.labels) {
      write_png(layout::label(c.root, id, l.index, task), encode_task(l.label.payload, task, l.label.valid));
      write_png(layout::label_mask(c.root, id, l.index, task), encode_mask(l.label.valid));
      any = any || l.label.valid;
    }
    covered = any.cast<double>().mean();
    std::lock_guard lock(mu);
    json errs = json::array();
    for (const auto& e : r.errors) errs.push_back({{"crop", e.index}, {"message", e.message}});
    crop_failures = crop_failures || !r.errors.empty();
    per_pano[id] = {{"labels_written", r.labels.size()}, {"pixel_coverage", covered}, {"crop_errors", errs}};
  });
  emit_report({{"task", to_string(task)}, {"panos", per_pano}, {"errors", errors_json(errors, panos)}});
  return errors.empty() && !crop_failures ? 0 : 1;
}

int cmd_aux(const ToolConfig& c, const std::vector<std::string>& ids) {
  const auto panos = select_panos(c, ids);
  std::mutex mu;
  json per_pano = json::object();
  const auto errors = run_work_queue(static_cast<int>(panos.size()), c.resolved_jobs(), [&](int i) {
    const std::string& id = panos[i];
    const Raster rgb = decode_task(read_png(layout::pano_input(c.root, id, Task::Rgb)), Task::Rgb);
    const GradientMap g = image_gradient(rgb);
    const EdgeDistanceField edf = edge_distance_field(g, c.edge_tau, c.edge_border_px);
    write_png(layout::aux(c.root, id, "gradient"), encode_task(g.hsv, Task::Rgb));
    write_png(layout::aux(c.root, id, "edges"), encode_mask(edf.edges));
    write_png(layout::aux(c.root, id, "edf"), encode_edf(edf.distance));
    json entry = {{"edge_pixels", edf.edges.count()}, {"no_seeds", edf.no_seeds}};
    const fs::path depth_path = layout::pano_input(c.root, id, Task::Depth);
    if (fs::exists(depth_path)) {
      Mask dvalid;
      const ErpImage depth(decode_task(read_png(depth_path), Task::Depth, &dvalid));
      const PointMap pm = metric_point_map(depth);
      write_png(layout::aux(c.root, id, "pointmap"), encode_point_map(pm.points, pm.valid));
      entry["pointmap"] = true;
      if (c.emit_vis) write_png(layout::aux(c.root, id, "vis_depth"), colorize(depth.planes[0], &dvalid));
    }
    if (c.emit_vis) {
      write_png(layout::aux(c.root, id, "vis_edf"), colorize(edf.distance, nullptr));
      const fs::path normal_path = layout::pano_input(c.root, id, Task::Normal);
      if (fs::exists(normal_path)) {
        Mask nvalid;
        const Raster n = decode_task(read_png(normal_path), Task::Normal, &nvalid);
        write_png(layout::aux(c.root, id, "vis_normal"), normal_vis(n, nvalid));
      }
    }
    std::lock_guard lock(mu);
    per_pano[id] = entry;
  });
  emit_report({{"panos", per_pano}, {"errors", errors_json(errors, panos)}});
  return errors.empty() ? 0 : 1;
}

int cmd_prompt(const ToolConfig& c, int n, const std::string& out) {
  if (n < 0) throw ConfigError("--n must be non-negative");
  const AttributePool pool = c.attribute_pool.empty() ? default_attribute_pool() : load_attribute_pool(c.attribute_pool);
  std::vector<PromptDraw> draws(n);
  const auto errors = run_work_queue(n, c.resolved_jobs(),
                                     [&](int i) { draws[i] = build_prompt(derive_seed(c.seed, std::uint64_t(i)), pool); });
  if (!errors.empty()) throw Failure(errors.front().message);
  json arr = json::array();
  for (int i = 0; i < n; ++i) {
    const auto& d = draws[i];
    arr.push_back({{"index", i},
                   {"domain", d.spec.domain == SceneDomain::Indoor ? "indoor" : "outdoor"},
                   {"text", d.text}});
  }
  const json j = {{"seed", c.seed}, {"prompts", arr}};
  if (out.empty()) {
    emit_report(j);
  } else {
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    std::ofstream f(out, std::ios::binary);
    if (!f) throw IoError("cannot write " + out);
    f << j.dump(2) << "\n";
    emit_report({{"written", out}, {"count", n}});
  }
  return 0;
}

std::vector<fs::path> task_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".png" && name.find(".mask.") == std::string::npos)
      files.push_back(e.path().filename());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_eval_dirs(const std::string& task_name, const fs::path& pred_dir, const fs::path& gt_dir, int classes,
                  int ignore_index) {
  const Task task = task_from_string(task_name);
  const auto files = task_files(gt_dir);
  if (files.empty()) throw IoError("no .png files in " + gt_dir.string());

  std::vector<double> pd, gd;
  std::vector<int> pl, gl;
  std::vector<Vec3<double>> pn, gn;
  std::vector<bool> keep;
  for (const auto& name : files) {
    const fs::path pp = pred_dir / name;
    if (!fs::exists(pp)) throw IoError("missing prediction " + pp.string());
    Mask pv, gv;
    const Raster pr = decode_task(read_png(pp), task, &pv);
    const Raster gr = decode_task(read_png(gt_dir / name), task, &gv);
    if (pr.width() != gr.width() || pr.height() != gr.height())
      throw DataError("size mismatch between " + pp.string() + " and " + (gt_dir / name).string());
    // Pixels excluded by a label mask next to the ground truth are not evaluated.
    fs::path mask_path = gt_dir / name;
    mask_path.replace_extension(".mask.png");
    if (fs::exists(mask_path)) gv = gv && decode_mask(read_png(mask_path));
    for (int y = 0; y < gr.height(); ++y)
      for (int x = 0; x < gr.width(); ++x) {
        switch (task) {
          case Task::Semantic:
            if (!gv(y, x)) continue;
            pl.push_back(static_cast<int>(pr.planes[0](y, x)));
            gl.push_back(static_cast<int>(gr.planes[0](y, x)));
            break;
          case Task::Depth:
            pd.push_back(pv(y, x) ? pr.planes[0](y, x) : 0.0);
            gd.push_back(gr.planes[0](y, x));
            keep.push_back(gv(y, x));
            break;
          case Task::Normal:
            pn.push_back(pv(y, x) ? pr.vec3(y, x) : Vec3<double>(0, 0, 1));
            gn.push_back(gr.vec3(y, x));
            keep.push_back(gv(y, x) && pv(y, x));
            break;
          case Task::Rgb:
            throw ConfigError("eval supports semantic, depth and normal");
        }
      }
  }

  MetricReport report;
  if (task == Task::Semantic) {
    int n_classes = classes;
    if (n_classes <= 0) {
      for (std::size_t i = 0; i < gl.size(); ++i) {
        if (gl[i] != ignore_index) n_classes = std::max(n_classes, gl[i] + 1);
        if (pl[i] != ignore_index) n_classes = std::max(n_classes, pl[i] + 1);
      }
    }
    report.semseg = semseg_miou(Eigen::Map<Eigen::ArrayXi>(pl.data(), pl.size()),
                                Eigen::Map<Eigen::ArrayXi>(gl.data(), gl.size()), std::max(n_classes, 1), ignore_index);
  } else if (task == Task::Depth) {
    FlatMask m(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) m[i] = keep[i];
    report.depth = depth_metrics(Eigen::Map<Eigen::ArrayXd>(pd.data(), pd.size()),
                                 Eigen::Map<Eigen::ArrayXd>(gd.data(), gd.size()), m);
  } else {
    Eigen::Matrix3Xd p(3, pn.size()), g(3, gn.size());
    FlatMask m(keep.size());
    for (std::size_t i = 0; i < pn.size(); ++i) {
      p.col(i) = pn[i];
      g.col(i) = gn[i];
      m[i] = keep[i];
    }
    report.normal = normal_metrics(p, g, m);
  }
  json j = json::parse(to_json(report));
  j["task"] = to_string(task);
  j["files"] = files.size();
  if (j.size() == 2) j[std::string(to_string(task))] = nullptr;
  emit_report(j);
  return 0;
}

TaskTriple read_triple(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  auto need = [&](const json& obj, const char* key) -> double {
    if (!obj.is_object() || !obj.contains(key) || !obj[key].is_number())
      throw ParseError(path.string() + ": missing numeric field '" + key + "'");
    return obj[key].get<double>();
  };
  TaskTriple t;
  if (j.contains("semseg") || j.contains("depth") || j.contains("normal")) {
    t.miou = need(j.value("semseg", json::object()), "miou");
    t.rmse = need(j.value("depth", json::object()), "rmse");
    t.normal_mean = need(j.value("normal", json::object()), "mean_deg");
  } else {
    t.miou = need(j, "miou");
    t.rmse = need(j, "rmse");
    t.normal_mean = need(j, "normal_mean");
  }
  return t;
}

int cmd_eval_delta(const fs::path& stl_path, const fs::path& mtl_path) {
  const TaskTriple stl = read_triple(stl_path), mtl = read_triple(mtl_path);
  const auto d = delta_mtl(stl, mtl);
  json j = {{"stl", {{"miou", stl.miou}, {"rmse", stl.rmse}, {"normal_mean", stl.normal_mean}}},
            {"mtl", {{"miou", mtl.miou}, {"rmse", mtl.rmse}, {"normal_mean", mtl.normal_mean}}}};
  j["delta_mtl_pct"] = d ? json(*d) : json(nullptr);
  emit_report(j);
  return 0;
}

int cmd_gradcheck(const ToolConfig& c, int instances) {
  const auto reports = nn::run_gradchecks(instances, c.seed);
  json arr = json::array();
  bool ok = true;
  for (const auto& r : reports) {
    ok = ok && r.pass();
    arr.push_back({{"op", r.op}, {"instances", r.instances}, {"max_rel_error", r.max_rel_error}, {"passed", r.pass()}});
  }
  emit_report({{"tolerance", nn::kGradcheckTolerance}, {"ops", arr}, {"passed", ok}});
  return ok ? 0 : 1;
}

int cmd_selftest(const ToolConfig& c) {
  const auto results = run_selftest(c.seed, c.resolved_jobs());
  std::cout << selftest_json(results) << "\n";
  return std::all_of(results.begin(), results.end(), [](const SuiteResult& r) { return r.passed; }) ? 0 : 1;
}

void print_error(const char* kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Panoramic supervision toolkit: pose sampling, patch extraction and re-projection, auxiliary labels, "
               "prompts, metrics and numeric checks."};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", g.set, "override a config key (key=value), repeatable");
  app.add_option("--jobs,-j", g.jobs, "worker threads (default: logical cores)")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--root", g.root, "dataset root");
  app.add_flag("--emit-vis", g.emit_vis, "write color-mapped inspection images");

  std::vector<std::string> ids;
  auto* sp = app.add_subcommand("sample-poses", "sample virtual camera poses into per-panorama manifests");
  std::optional<int> n_crops;
  std::string manifest_out;
  sp->add_option("--n", n_crops, "crops per panorama")->check(CLI::PositiveNumber);
  sp->add_option("--pano", ids, "panorama ids (default: every directory under the root)");
  sp->add_option("--out", manifest_out, "write a single manifest to this path instead");

  auto* ex = app.add_subcommand("extract-patches", "cut perspective crops for every manifest pose");
  std::vector<std::string> ex_tasks;
  ex->add_option("--pano", ids, "panorama ids");
  ex->add_option("--task", ex_tasks, "tasks to extract (default: rgb)");

  auto* rp = app.add_subcommand("reproject", "lift perspective predictions back onto the panorama grid");
  std::string rp_task;
  rp->add_option("--pano", ids, "panorama ids");
  rp->add_option("--task", rp_task, "semantic, depth or normal")->required();

  auto* ax = app.add_subcommand("aux-labels", "gradient map, edge distance field and metric point map");
  ax->add_option("--pano", ids, "panorama ids");

  auto* pg = app.add_subcommand("prompt-gen", "synthesize panorama text prompts");
  int prompt_n = 10;
  std::string prompt_out;
  pg->add_option("--n", prompt_n, "number of prompts");
  pg->add_option("--out", prompt_out, "output JSON file (default: stdout)");

  auto* ev = app.add_subcommand("eval", "metrics over prediction/ground-truth directories, or delta against STL");
  std::string ev_task, ev_pred, ev_gt, ev_stl, ev_mtl;
  int ev_classes = 0, ev_ignore = 255;
  ev->add_option("--task", ev_task, "semantic, depth or normal");
  ev->add_option("--pred", ev_pred, "prediction directory");
  ev->add_option("--gt", ev_gt, "ground-truth directory");
  ev->add_option("--classes", ev_classes, "number of semantic classes (default: inferred)");
  ev->add_option("--ignore-index", ev_ignore, "semantic label to skip");
  ev->add_option("--stl", ev_stl, "single-task report (JSON)");
  ev->add_option("--mtl", ev_mtl, "multi-task report (JSON)");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference checks of the differentiable operators");
  int gc_instances = 20;
  gc->add_option("--instances", gc_instances, "random instances per operator")->check(CLI::PositiveNumber);

  auto* st = app.add_subcommand("selftest", "run the built-in property suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    const ToolConfig c = resolve_config(g);
    if (sp->parsed()) return cmd_sample_poses(c, n_crops, ids, manifest_out);
    if (ex->parsed()) return cmd_extract(c, ids, ex_tasks);
    if (rp->parsed()) return cmd_reproject(c, ids, rp_task);
    if (ax->parsed()) return cmd_aux(c, ids);
    if (pg->parsed()) return cmd_prompt(c, prompt_n, prompt_out);
    if (ev->parsed()) {
      if (!ev_stl.empty() || !ev_mtl.empty()) {
        if (ev_stl.empty() || ev_mtl.empty()) throw CLI::ValidationError("--stl and --mtl go together");
        return cmd_eval_delta(ev_stl, ev_mtl);
      }
      if (ev_task.empty() || ev_pred.empty() || ev_gt.empty())
        throw CLI::ValidationError("eval needs --task, --pred and --gt (or --stl and --mtl)");
      return cmd_eval_dirs(ev_task, ev_pred, ev_gt, ev_classes, ev_ignore);
    }
    if (gc->parsed()) return cmd_gradcheck(c, gc_instances);
    if (st->parsed()) return cmd_selftest(c);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const IoError& e) {
    print_error("io", e.what());
    return 1;
  } catch (const ParseError& e) {
    print_error("parse", e.what());
    return 1;
  } catch (const ConfigError& e) {
    print_error("config", e.what());
    return 1;
  } catch (const DataError& e) {
    print_error("data", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 1;
  }
  return 2;
}
