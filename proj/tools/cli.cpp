// Copyright 2026 The LENS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "lens/agent_router.hpp"
#include "lens/checkpoint.hpp"
#include "lens/config.hpp"
#include "lens/interchange.hpp"
#include "lens/objectives.hpp"
#include "lens/synthetic.hpp"

namespace lens::cli {
namespace fs = std::filesystem;

namespace {

std::string shortest(double value) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return {buf, end};
}

std::string fixed6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

std::uint64_t effective_seed(std::uint64_t flag_seed) {
  RunConfig env;
  env.seed = flag_seed;
  apply_environment(env);
  return env.seed;
}

Model model_or_default(const std::string& checkpoint, const ModelConfig& fallback, std::uint64_t seed) {
  return checkpoint.empty() ? init_model(fallback, derive_seed(seed, 0)) : io::load_checkpoint(checkpoint);
}

synth::BlobTaskConfig task_for(const ModelConfig& model) {
  synth::BlobTaskConfig task;
  task.grid_h = model.grid_h;
  task.grid_w = model.grid_w;
  return task;
}

Sample synthetic_sample(const ModelConfig& model, std::uint64_t seed) {
  const synth::BlobTask task(task_for(model), model.model_dim, model.prompt_dim);
  Rng rng(derive_seed(seed, 1));
  return task.sample(rng);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string metrics_csv(const std::vector<LossRecord>& losses) {
  std::string csv = "step,total,attn,seg,dice,bce\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const LossRecord& r = losses[i];
    csv += std::to_string(i) + "," + shortest(r.total) + "," + shortest(r.attention) + "," +
           shortest(r.seg) + "," + shortest(r.dice) + "," + shortest(r.bce) + "\n";
  }
  return csv;
}

// --- infer -----------------------------------------------------------------

struct InferArgs {
  bool synthetic = false;
  std::string features;
  std::string checkpoint;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int infer(const InferArgs& a, std::ostream& out) {
  if (a.synthetic == !a.features.empty()) {
    throw CLI::ValidationError("infer", "exactly one of --synthetic or --features is required");
  }
  const std::uint64_t seed = effective_seed(a.seed);
  head::HeadInput input;
  decoder::ImageEmbedding image;
  Model model;
  if (a.synthetic) {
    model = model_or_default(a.checkpoint, synth::FitConfig::blob_defaults().model, seed);
    Sample s = synthetic_sample(model.config, seed);
    input = std::move(s.input);
    image = std::move(s.image);
  } else {
    io::LoadedExport e = io::load_export(a.features);
    if (!e.image) throw std::runtime_error("feature export has no sam_embedding file");
    ModelConfig config = synth::FitConfig::blob_defaults().model;
    config.grid_h = e.input.grid_h;
    config.grid_w = e.input.grid_w;
    config.model_dim = e.manifest.dim;
    config.prompt_dim = e.image->dim();
    model = model_or_default(a.checkpoint, config, seed);
    input = std::move(e.input);
    image = std::move(*e.image);
  }
  const PipelineOutput result = run_pipeline(model, input, image);
  fs::create_directories(a.out);
  io::export_pgm(objectives::sigmoid(result.mask.logits), fs::path(a.out) / "mask.pgm");
  std::string lines;
  for (const keypoint::Keypoint& k : result.keypoints) {
    lines += fixed6(k.x) + " " + fixed6(k.y) + " " + fixed6(k.score) + "\n";
  }
  write_text(fs::path(a.out) / "keypoints.txt", lines);
  out << "wrote " << (fs::path(a.out) / "mask.pgm").string() << " and " << result.keypoints.size()
      << " keypoints\n";
  return kExitOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string features;
  std::string out = "lens_run";
};

int train_cmd(const TrainArgs& a, std::ostream& out) {
  RunConfig run;
  synth::FitConfig fit = synth::FitConfig::blob_defaults();
  if (!a.config.empty()) {
    run = load_run_config(a.config);
  } else {
    run.model = fit.model;
    run.train = fit.train;
    run.seed = fit.seed;
    run.steps = fit.steps;
  }
  if (a.steps) run.steps = *a.steps;
  if (a.seed) run.seed = *a.seed;
  apply_environment(run);
  run.validate();
  fs::create_directories(a.out);

  std::vector<LossRecord> losses;
  Model trained;
  if (a.features.empty()) {
    fit.model = run.model;
    fit.train = run.train;
    fit.steps = run.steps;
    fit.seed = run.seed;
    fit.task = task_for(run.model);
    synth::FitReport report = synth::fit_synthetic(fit);
    out << "baseline gIoU=" << format_metric(report.baseline.giou)
        << " cIoU=" << format_metric(report.baseline.ciou) << "\n";
    out << "final gIoU=" << format_metric(report.final.giou) << " cIoU=" << format_metric(report.final.ciou)
        << "\n";
    losses = std::move(report.losses);
    trained = std::move(report.model);
  } else {
    io::LoadedExport e = io::load_export(a.features);
    if (!e.image || !e.mask) throw std::runtime_error("file-fed training needs sam_embedding and gt_mask files");
    run.model.grid_h = e.input.grid_h;
    run.model.grid_w = e.input.grid_w;
    run.model.model_dim = e.manifest.dim;
    run.model.prompt_dim = e.image->dim();
    trained = init_model(run.model, derive_seed(run.seed, 0));
    const std::vector<Sample> batch = {Sample{e.input, *e.image, *e.mask, {}}};
    train::AdamW optimizer(run.train.optimizer);
    Rng dropout(derive_seed(run.seed, 3));
    for (std::size_t step = 0; step < run.steps; ++step) {
      losses.push_back(train::train_step(trained, batch, optimizer, dropout, run.train).losses);
    }
    const synth::Metrics m = synth::evaluate(trained, batch);
    out << "final gIoU=" << format_metric(m.giou) << " cIoU=" << format_metric(m.ciou) << "\n";
  }
  write_text(fs::path(a.out) / "metrics.csv", metrics_csv(losses));
  io::save_checkpoint(fs::path(a.out) / "checkpoint", trained);
  out << "wrote " << (fs::path(a.out) / "metrics.csv").string() << " and checkpoint\n";
  return kExitOk;
}

// --- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 7;
  std::size_t grid = 8;
  std::size_t dim = 16;
  std::size_t points = 4;
  train::GradCheckOptions options = [] {
    train::GradCheckOptions o;
    o.fraction = 0.1;
    return o;
  }();
};

int gradcheck(GradcheckArgs a, std::ostream& out) {
  const std::uint64_t seed = effective_seed(a.seed);
  const synth::ToyProblem toy = synth::make_toy_problem(a.grid, a.dim, a.points, seed);
  a.options.seed = seed;
  const train::GradCheckReport r = train::fd_gradient_check(toy.model, toy.sample, a.options);
  out << "max_relative_error=" << shortest(r.max_relative_error) << " worst=" << r.worst_parameter
      << " checked=" << r.coordinates_checked << "\n";
  for (const std::string& name : r.offending) out << "offending " << name << "\n";
  out << (r.passed() ? "PASS" : "FAIL") << "\n";
  return r.passed() ? kExitOk : kExitFailure;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string dir;
  std::string pred;
  std::string gt;
};

int eval(const EvalArgs& a, std::ostream& out) {
  std::vector<objectives::MaskPair> pairs;
  auto add = [&](const fs::path& pred, const fs::path& gt) {
    pairs.push_back({io::read_tensor(pred).tensor, io::read_tensor(gt).tensor});
  };
  if (!a.dir.empty()) {
    const std::string suffix = ".pred.ltns";
    std::vector<fs::path> preds;
    for (const auto& entry : fs::directory_iterator(a.dir)) {
      const std::string name = entry.path().filename().string();
      if (name.size() > suffix.size() && name.ends_with(suffix)) preds.push_back(entry.path());
    }
    std::sort(preds.begin(), preds.end());
    for (const fs::path& p : preds) {
      const std::string name = p.filename().string();
      const fs::path gt = p.parent_path() / (name.substr(0, name.size() - suffix.size()) + ".gt.ltns");
      if (!fs::exists(gt)) throw std::runtime_error("missing ground truth " + gt.string());
      add(p, gt);
    }
    if (pairs.empty()) throw std::runtime_error("no *.pred.ltns files in " + a.dir);
  } else if (!a.pred.empty() && !a.gt.empty()) {
    add(a.pred, a.gt);
  } else {
    throw CLI::ValidationError("eval", "give --dir, or both --pred and --gt");
  }
  out << "gIoU=" << format_metric(objectives::giou(pairs)) << " cIoU=" << format_metric(objectives::ciou(pairs))
      << "\n";
  return kExitOk;
}

// --- route -----------------------------------------------------------------

struct RouteArgs {
  std::string instruction;
  std::string script;
  std::string checkpoint;
  std::uint64_t seed = 0;
  std::string out;
};

int route(const RouteArgs& a, std::ostream& out) {
  if (a.script.empty()) {
    if (a.instruction.empty()) throw CLI::ValidationError("route", "give an instruction or --script");
    out << agent::to_string(agent::route_intent(a.instruction, false)) << "\n";
    return kExitOk;
  }
  const std::uint64_t seed = effective_seed(a.seed);
  Model model = model_or_default(a.checkpoint, synth::FitConfig::blob_defaults().model, seed);
  const Sample s = synthetic_sample(model.config, seed);
  const agent::Image image{"synthetic-" + std::to_string(seed), s.pixels};
  agent::StubAgent stub(model.config.grid_h, model.config.grid_w, model.config.model_dim, seed);
  agent::PipelineSegmenter segmenter(std::move(model), s.pixels.dim(2), derive_seed(seed, 4));
  agent::SessionMemory memory;
  if (!a.out.empty()) fs::create_directories(a.out);
  const std::vector<std::string> lines = agent::parse_script(read_text(a.script));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const agent::TurnResult r = agent::handle_turn(stub, segmenter, memory, lines[i], &image);
    out << agent::to_string(r.intent) << "\t" << r.reply << "\n";
    if (r.mask && !a.out.empty()) {
      agent::export_triptych(image.pixels, *r.mask, fs::path(a.out) / ("turn_" + std::to_string(i) + ".pgm"));
    }
  }
  return kExitOk;
}

}  // namespace

std::string format_metric(double value) {
  std::string s = shortest(value);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lens: grounding-map keypoint prompts for mask decoding", "lens"};
  app.require_subcommand(1);

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "run the pipeline and write mask.pgm + keypoints.txt");
  infer_cmd->add_flag("--synthetic", infer_args.synthetic, "generate a synthetic blob sample");
  infer_cmd->add_option("--features", infer_args.features, "feature export manifest (JSON)");
  infer_cmd->add_option("--checkpoint", infer_args.checkpoint, "checkpoint directory");
  infer_cmd->add_option("--seed", infer_args.seed, "sample and init seed");
  infer_cmd->add_option("--out", infer_args.out, "output directory");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "fit the synthetic task or an exported sample");
  train->add_option("--steps", train_args.steps, "optimizer steps");
  train->add_option("--seed", train_args.seed, "run seed");
  train->add_option("--config", train_args.config, "run config (JSON)");
  train->add_option("--features", train_args.features, "feature export manifest for file-fed training");
  train->add_option("--out", train_args.out, "output directory for metrics.csv and checkpoint/");

  GradcheckArgs grad_args;
  auto* grad = app.add_subcommand("gradcheck", "compare gradients with central differences");
  grad->add_option("--seed", grad_args.seed, "problem seed");
  grad->add_option("--grid", grad_args.grid, "grid side");
  grad->add_option("--dim", grad_args.dim, "feature width d = d_s");
  grad->add_option("--points", grad_args.points, "keypoint budget m");
  grad->add_option("--fraction", grad_args.options.fraction, "share of coordinates per tensor");
  grad->add_option("--step", grad_args.options.step, "finite-difference step");
  grad->add_option("--tolerance", grad_args.options.tolerance, "maximum relative error");

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "gIoU/cIoU over prediction/ground-truth tensor pairs");
  ev->add_option("--dir", eval_args.dir, "directory of <name>.pred.ltns / <name>.gt.ltns pairs");
  ev->add_option("--pred", eval_args.pred, "single prediction tensor");
  ev->add_option("--gt", eval_args.gt, "single ground-truth tensor");

  RouteArgs route_args;
  auto* rt = app.add_subcommand("route", "classify an instruction or run a scripted session");
  rt->add_option("instruction", route_args.instruction, "instruction text");
  rt->add_option("--script", route_args.script, "one instruction per line");
  rt->add_option("--checkpoint", route_args.checkpoint, "checkpoint directory");
  rt->add_option("--seed", route_args.seed, "session seed");
  rt->add_option("--out", route_args.out, "directory for seg-turn triptychs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*infer_cmd) return infer(infer_args, out);
    if (*train) return train_cmd(train_args, out);
    if (*grad) return gradcheck(grad_args, out);
    if (*ev) return eval(eval_args, out);
    return route(route_args, out);
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace lens::cli
