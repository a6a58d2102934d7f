// vigil command line front end.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "vigil/api.hpp"
#include "vigil/color.hpp"
#include "vigil/config.hpp"
#include "vigil/corpus.hpp"
#include "vigil/eval.hpp"
#include "vigil/pipeline.hpp"
#include "vigil/plate.hpp"
#include "vigil/registry.hpp"
#include "vigil/vmmr.hpp"

namespace fs = std::filesystem;
using namespace vigil;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

PipelineConfig load_config(const fs::path& path) {
  return parse_pipeline_config(KeyValueFile::load(path), path.parent_path());
}

int cmd_run(const fs::path& config, bool json) {
  const auto cfg = load_config(config);
  const auto report = run(cfg, [](const Sighting& s, const MatchScore& m, const WatchlistEntry& e) {
    std::cerr << "match " << e.id << " <- " << s.id << " score " << m.score << "\n";
  });
  if (json)
    std::cout << report.to_json().dump(2) << "\n";
  else
    std::cout << report.render();
  return 0;
}

int cmd_eval(const fs::path& manifest_path, bool json) {
  const auto manifest = load_manifest(manifest_path);
  const auto r = run_benchmark(manifest);
  if (json) {
    auto j = to_json(r.report);
    j["localization_rate"] = r.localization_rate();
    j["exact_rate"] = r.exact_rate();
    j["clean_exact_rate"] = r.clean_exact_rate();
    j["char_accuracy"] = r.char_accuracy();
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  std::cout << render_table(r.report) << "\n";
  std::cout << std::fixed << std::setprecision(4) << "plate localization " << r.localization_rate() << " (" << r.plates_hit
            << "/" << r.plates_expected << ")\n"
            << "exact read         " << r.exact_rate() << "\n"
            << "exact read (clean) " << r.clean_exact_rate() << " (" << r.clean_exact << "/" << r.clean_plates << ")\n"
            << "character accuracy " << r.char_accuracy() << " (" << r.chars_correct << "/" << r.chars_total << ")\n";
  return 0;
}

int cmd_plate_read(const fs::path& image, const std::optional<fs::path>& debug_dir) {
  plate::PlateDebug dbg;
  try {
    const auto r = plate::read_plate(load_frame(image), {}, nullptr, debug_dir ? &dbg : nullptr);
    std::cout << r.text << "\t" << plate::to_string(r.plate_type) << "\t" << std::fixed << std::setprecision(3) << r.confidence;
    for (const auto& c : r.quad.corners) std::cout << "\t" << c.x << "," << c.y;
    std::cout << "\n";
  } catch (...) {
    if (debug_dir) {
      fs::create_directories(*debug_dir);
      write_file(*debug_dir / "locate_mask.pgm", encode_pgm(dbg.locate_mask));
    }
    throw;
  }
  if (debug_dir) {
    fs::create_directories(*debug_dir);
    write_file(*debug_dir / "locate_mask.pgm", encode_pgm(dbg.locate_mask));
    if (dbg.rectified) save_gray(*debug_dir / "rectified.pgm", *dbg.rectified);
    if (dbg.ink) write_file(*debug_dir / "ink.pgm", encode_pgm(*dbg.ink));
  }
  return 0;
}

int cmd_plate_templates(const fs::path& out) {
  fs::create_directories(out);
  for (const auto& t : plate::builtin_templates()) save_gray(out / (std::string("glyph_") + t.ch + ".pgm"), plate::template_image(t));
  std::cout << plate::builtin_templates().size() << " templates written to " << out.string() << "\n";
  return 0;
}

int cmd_color(const fs::path& image, std::size_t k, std::uint64_t seed) {
  ColorOptions opt;
  opt.k = k;
  opt.seed = seed;
  const auto v = classify_vehicle_color(load_frame(image), opt);
  std::cout << to_string(v.name) << "\t" << std::fixed << std::setprecision(3) << v.fraction << "\n";
  const auto& c = v.clusters;
  for (std::size_t i = 0; i < c.centroids.size(); ++i) {
    const auto& p = c.centroids[i];
    std::cout << "  cluster " << i << "  rgb(" << std::setprecision(1) << p.r << ", " << p.g << ", " << p.b << ")  n=" << c.populations[i]
              << "  " << to_string(name_color(p)) << "\n";
  }
  return 0;
}

int cmd_vmmr_arch(double alpha, int res, int classes) {
  const auto spec = vmmr::build_architecture(alpha, res, classes);
  const auto shapes = vmmr::propagate_shapes(spec);
  const auto macs = vmmr::layer_mult_adds(spec);
  std::cout << vmmr::model_name(spec) << "\n";
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto& s = shapes[i + 1];
    std::cout << std::setw(3) << i << "  " << std::left << std::setw(16) << vmmr::to_string(l.kind) << std::right << " s" << l.stride
              << "  out " << s.height << "x" << s.width << "x" << s.channels << "  params " << vmmr::layer_param_count(l)
              << "  mult-adds " << macs[i] << "\n";
  }
  std::cout << "total params " << vmmr::count_params(spec) << ", mult-adds " << vmmr::count_mult_adds(spec) << "\n";
  return 0;
}

int cmd_vmmr_classify(const fs::path& weights, const std::optional<fs::path>& labels_path, const fs::path& image, int top) {
  const auto m = vmmr::load_weights(weights);
  const auto labels = load_labels(labels_path.value_or(fs::path{}), m.spec.num_classes);
  const auto pred = vmmr::classify(m.spec, m.weights, load_frame(image));
  const int n = std::min<int>(top, static_cast<int>(pred.class_ranks.size()));
  for (int i = 0; i < n; ++i)
    std::cout << i + 1 << "\t" << labels[static_cast<std::size_t>(pred.class_ranks[i])] << "\t" << std::fixed << std::setprecision(4)
              << pred.probabilities[i] << "\n";
  return 0;
}

int cmd_vmmr_sanity(const fs::path& out) {
  fs::create_directories(out);
  corpus::write_sanity_model(out / "sanity.vmmr", out / "sanity.labels");
  const auto m = corpus::sanity_model();
  const auto report = vmmr::evaluate_topk(m.spec, m.weights, corpus::texture_set(50, 99));
  std::cout << "wrote " << (out / "sanity.vmmr").string() << " (top-1 " << report.top1 << " on " << report.samples << " samples)\n";
  return 0;
}

int cmd_gen_corpus(int scenes, std::uint64_t seed, const fs::path& out) {
  corpus::CorpusOptions opt;
  opt.scenes = scenes;
  opt.seed = seed;
  const auto m = corpus::generate_corpus(out, opt);
  std::cout << m.records.size() << " scenes written to " << out.string() << "\n";
  return 0;
}

int cmd_serve(const std::optional<fs::path>& config, std::optional<int> port, bool no_pipeline) {
  KeyValueFile kv;
  fs::path base;
  if (config) {
    kv = KeyValueFile::load(*config);
    base = config->parent_path();
  }
  auto cfg = parse_pipeline_config(kv, base);
  auto sopt = api::server_options_from(kv);
  if (port) sopt.port = *port;

  Registry registry(cfg.data_dir);
  std::unique_ptr<Pipeline> pipeline;
  if (!no_pipeline) pipeline = std::make_unique<Pipeline>(cfg, &registry);
  api::Service service(registry, pipeline.get(), sopt);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const int bound = service.start();
  std::cerr << "vigil " << api::kVersion << " listening on " << sopt.host << ":" << bound << " (store " << cfg.data_dir.string()
            << ")\n";
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  std::cerr << "shutting down\n";
  service.stop();
  if (pipeline) pipeline->stop();
  registry.flush();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vigil: vehicle surveillance pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(api::kVersion));

  fs::path config;
  bool json = false;
  auto* run_cmd = app.add_subcommand("run", "stream a frame source through the pipeline");
  run_cmd->add_option("--config", config, "key=value config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_flag("--json", json, "print the report as JSON");

  fs::path manifest;
  auto* eval_cmd = app.add_subcommand("eval", "benchmark the modules on a labelled manifest");
  eval_cmd->add_option("--manifest", manifest, "manifest.tsv")->required()->check(CLI::ExistingFile);
  eval_cmd->add_flag("--json", json, "print JSON");

  auto* plate_cmd = app.add_subcommand("plate", "license plate tools");
  plate_cmd->require_subcommand(1);
  fs::path image;
  std::optional<fs::path> debug_dir;
  auto* plate_read = plate_cmd->add_subcommand("read", "locate and read the plate in an image");
  plate_read->add_option("image", image)->required()->check(CLI::ExistingFile);
  plate_read->add_option("--debug-dir", debug_dir, "write intermediate masks here");
  fs::path out;
  auto* plate_templates = plate_cmd->add_subcommand("templates", "write the glyph templates as PGM");
  plate_templates->add_option("--out", out)->required();

  std::size_t k = 4;
  std::uint64_t seed = 0;
  auto* color_cmd = app.add_subcommand("color", "dominant colour of a vehicle crop");
  color_cmd->add_option("image", image)->required()->check(CLI::ExistingFile);
  color_cmd->add_option("--k", k, "cluster count")->capture_default_str();
  color_cmd->add_option("--seed", seed, "k-means seed")->capture_default_str();

  auto* vmmr_cmd = app.add_subcommand("vmmr", "make and model network tools");
  vmmr_cmd->require_subcommand(1);
  double alpha = 1.0;
  int res = 224;
  int classes = 1000;
  auto* arch = vmmr_cmd->add_subcommand("arch", "print layer shapes, parameters and mult-adds");
  arch->add_option("--alpha", alpha)->capture_default_str();
  arch->add_option("--res", res)->capture_default_str();
  arch->add_option("--classes", classes)->capture_default_str();
  fs::path weights;
  std::optional<fs::path> labels;
  int top = 5;
  auto* classify_cmd = vmmr_cmd->add_subcommand("classify", "rank classes for an image");
  classify_cmd->add_option("--weights", weights)->required()->check(CLI::ExistingFile);
  classify_cmd->add_option("--labels", labels);
  classify_cmd->add_option("--top", top)->capture_default_str();
  classify_cmd->add_option("image", image)->required()->check(CLI::ExistingFile);
  auto* sanity = vmmr_cmd->add_subcommand("sanity", "write the small texture model used as stub weights");
  sanity->add_option("--out", out)->required();

  int scenes = 200;
  std::uint64_t corpus_seed = 1;
  auto* gen = app.add_subcommand("gen-corpus", "render a synthetic scene corpus with ground truth");
  gen->add_option("--scenes", scenes)->capture_default_str();
  gen->add_option("--seed", corpus_seed)->capture_default_str();
  gen->add_option("--out", out)->required();

  std::optional<fs::path> serve_config;
  std::optional<int> port;
  bool no_pipeline = false;
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--config", serve_config)->check(CLI::ExistingFile);
  serve->add_option("--port", port);
  serve->add_flag("--no-pipeline", no_pipeline, "query-only service");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(config, json);
    if (*eval_cmd) return cmd_eval(manifest, json);
    if (*plate_read) return cmd_plate_read(image, debug_dir);
    if (*plate_templates) return cmd_plate_templates(out);
    if (*color_cmd) return cmd_color(image, k, seed);
    if (*arch) return cmd_vmmr_arch(alpha, res, classes);
    if (*classify_cmd) return cmd_vmmr_classify(weights, labels, image, top);
    if (*sanity) return cmd_vmmr_sanity(out);
    if (*gen) return cmd_gen_corpus(scenes, corpus_seed, out);
    if (*serve) return cmd_serve(serve_config, port, no_pipeline);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
