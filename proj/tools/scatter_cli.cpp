/* Copyright 2026 The Scatter STR Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "scatter/checkpoint.hpp"
#include "scatter/config.hpp"
#include "scatter/eval.hpp"
#include "scatter/model.hpp"
#include "scatter/synth.hpp"
#include "scatter/trainer.hpp"

using nlohmann::json;
using namespace scatter;

namespace {

int cmd_gen_data(const std::string& config_path, bool as_json) {
  GenConfig cfg = gen_config_from_json(load_json_file(config_path));
  DatasetPaths paths = generate_dataset(cfg);
  std::uint64_t h = dataset_hash(paths.train_manifest);
  if (as_json) {
    std::cout << json{{"train", paths.train_manifest},
                      {"val", paths.val_manifest},
                      {"test", paths.test_manifest},
                      {"train_hash", h}}
                     .dump()
              << "\n";
  } else {
    std::cout << "train manifest: " << paths.train_manifest << "\n"
              << "val manifest:   " << paths.val_manifest << "\n"
              << "test manifest:  " << paths.test_manifest << "\n"
              << "train hash:     " << std::hex << h << std::dec << "\n";
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume, bool as_json) {
  TrainConfig cfg = train_config_from_json(load_json_file(config_path));
  TrainResult r = train(cfg, resume);
  if (as_json) {
    std::cout << json{{"steps", r.steps_run},
                      {"initial_loss", r.initial_loss},
                      {"final_loss", r.final_loss},
                      {"best_val_acc", r.best_val_acc},
                      {"checkpoint", r.checkpoint_path}}
                     .dump()
              << "\n";
  } else {
    std::cout << "steps:        " << r.steps_run << "\n"
              << "initial loss: " << r.initial_loss << "\n"
              << "final loss:   " << r.final_loss << "\n"
              << "best val acc: " << r.best_val_acc << "\n"
              << "checkpoint:   " << r.checkpoint_path << "\n";
  }
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest, bool analysis, bool rotate,
             std::size_t threads, const std::string& dump, bool as_json) {
  LoadedCheckpoint ck = load_checkpoint(ckpt);
  auto records = load_manifest(manifest);
  EvalOptions opts;
  opts.analysis = analysis;
  opts.rotate = rotate;
  opts.threads = threads;
  EvalReport rep = evaluate(*ck.model, records, opts);
  if (!dump.empty()) dump_samples_tsv(rep, dump);
  if (as_json) {
    json j{{"count", rep.count},
           {"accuracy", rep.accuracy},
           {"accuracy_regular", rep.accuracy_regular},
           {"accuracy_irregular", rep.accuracy_irregular}};
    if (analysis) {
      j["per_decoder"] = rep.per_decoder;
      j["oracle"] = rep.oracle;
    }
    std::cout << j.dump() << "\n";
  } else {
    std::cout << "samples:            " << rep.count << "\n"
              << "word accuracy:      " << rep.accuracy << "\n"
              << "regular accuracy:   " << rep.accuracy_regular << " (" << rep.count_regular
              << ")\n"
              << "irregular accuracy: " << rep.accuracy_irregular << " (" << rep.count_irregular
              << ")\n";
    if (analysis) {
      for (std::size_t j = 0; j < rep.per_decoder.size(); ++j)
        std::cout << "decoder " << (j + 1) << " accuracy: " << rep.per_decoder[j] << "\n";
      std::cout << "oracle accuracy:    " << rep.oracle << "\n";
    }
  }
  return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& image, bool rotate,
              const std::string& attn_dump, bool as_json) {
  LoadedCheckpoint ck = load_checkpoint(ckpt);
  GrayImage img = read_png(image);
  Prediction p = rotate ? infer_with_rotation(*ck.model, img) : infer_image(*ck.model, img);
  if (!attn_dump.empty()) {
    // re-run the chosen orientation and export per-step attention rows
    GrayImage chosen = img;
    if (p.source == "cw") chosen = rotate90_cw(img);
    if (p.source == "ccw") chosen = rotate90_ccw(img);
    NoGradGuard ng;
    auto out = ck.model->forward_infer_full(model_input(*ck.model, chosen));
    std::ofstream f(attn_dump);
    if (!f) throw IoError("cannot write attention dump " + attn_dump);
    for (const auto& row : out.attention_maps()) {
      for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "\t" : "") << row[i];
      f << "\n";
    }
  }
  if (as_json) {
    std::cout << json{{"text", p.text}, {"confidence", p.confidence}, {"source", p.source}}.dump()
              << "\n";
  } else {
    std::cout << "text:        " << p.text << "\n"
              << "confidence:  " << p.confidence << "\n"
              << "orientation: " << p.source << "\n";
  }
  return 0;
}

int cmd_prune(const std::string& ckpt, std::size_t blocks, const std::string& out, bool as_json) {
  LoadedCheckpoint ck = load_checkpoint(ckpt);
  auto pruned = prune(*ck.model, blocks);
  save_checkpoint(*pruned, nullptr, ck.meta, out);
  std::size_t before = ck.model->params().total_elements();
  std::size_t after = pruned->params().total_elements();
  if (as_json) {
    std::cout << json{{"out", out}, {"params_before", before}, {"params_after", after}}.dump()
              << "\n";
  } else {
    std::cout << "pruned to " << blocks << " block(s): " << out << "\n"
              << "parameters: " << before << " -> " << after << "\n";
  }
  return 0;
}

int cmd_bench(const std::string& ckpt, std::vector<std::size_t> blocks, std::size_t iters,
              bool as_json) {
  LoadedCheckpoint ck = load_checkpoint(ckpt);
  if (blocks.empty())
    for (std::size_t k = 1; k <= ck.model->config().blocks; ++k) blocks.push_back(k);
  LatencyReport rep = benchmark_latency(*ck.model, blocks, iters);
  if (as_json) {
    json by_blocks = json::object();
    for (std::size_t i = 0; i < blocks.size(); ++i)
      by_blocks[std::to_string(blocks[i])] = rep.mean_ms[i];
    std::cout << json{{"latency_ms_by_blocks", by_blocks},
                      {"per_block_ms", rep.per_block_ms},
                      {"r2", rep.r2}}
                     .dump()
              << "\n";
  } else {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      std::cout << "blocks=" << blocks[i] << "  " << rep.mean_ms[i] << " ms\n";
    std::cout << "per-block marginal cost: " << rep.per_block_ms << " ms\n"
              << "linear fit R^2:          " << rep.r2 << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SCATTER scene-text recognizer"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "machine-readable output");

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::string gen_config;
  gen->add_option("--config", gen_config, "GenConfig JSON")->required();

  auto* tr = app.add_subcommand("train", "train a model");
  std::string train_config, resume;
  tr->add_option("--config", train_config, "train config JSON")->required();
  tr->add_option("--resume", resume, "checkpoint to resume from");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  std::string eval_ckpt, eval_manifest, eval_dump;
  bool eval_analysis = false, eval_rotate = false;
  std::size_t eval_threads = 0;
  ev->add_option("--checkpoint", eval_ckpt)->required();
  ev->add_option("--manifest", eval_manifest)->required();
  ev->add_flag("--analysis", eval_analysis, "per-decoder and oracle analyses");
  ev->add_flag("--rotate", eval_rotate, "apply the tall-image rotation heuristic");
  ev->add_option("--threads", eval_threads);
  ev->add_option("--dump-samples", eval_dump, "sample-level TSV dump");

  auto* in = app.add_subcommand("infer", "recognize one image");
  std::string infer_ckpt, infer_image, attn_dump;
  bool infer_rotate = false;
  in->add_option("--checkpoint", infer_ckpt)->required();
  in->add_option("--image", infer_image)->required();
  in->add_flag("--rotate", infer_rotate);
  in->add_option("--attn-dump", attn_dump, "write per-step attention rows (TSV)");

  auto* pr = app.add_subcommand("prune", "keep the first k blocks for inference");
  std::string prune_ckpt, prune_out;
  std::size_t prune_blocks = 1;
  pr->add_option("--checkpoint", prune_ckpt)->required();
  pr->add_option("--blocks", prune_blocks)->required();
  pr->add_option("--out", prune_out)->required();

  auto* be = app.add_subcommand("bench", "inference latency by block count");
  std::string bench_ckpt;
  std::vector<std::size_t> bench_blocks;
  std::size_t bench_iters = 100;
  be->add_option("--checkpoint", bench_ckpt)->required();
  be->add_option("--blocks", bench_blocks, "block counts (default 1..b)");
  be->add_option("--iters", bench_iters);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << "run with --help for usage\n";
    return 2;
  }

  try {
    if (*gen) return cmd_gen_data(gen_config, as_json);
    if (*tr) return cmd_train(train_config, resume, as_json);
    if (*ev)
      return cmd_eval(eval_ckpt, eval_manifest, eval_analysis, eval_rotate, eval_threads,
                      eval_dump, as_json);
    if (*in) return cmd_infer(infer_ckpt, infer_image, infer_rotate, attn_dump, as_json);
    if (*pr) return cmd_prune(prune_ckpt, prune_blocks, prune_out, as_json);
    if (*be) return cmd_bench(bench_ckpt, bench_blocks, bench_iters, as_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
