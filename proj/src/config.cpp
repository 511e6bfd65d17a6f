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

#include "scatter/config.hpp"

#include <fstream>

namespace scatter {

using nlohmann::json;

namespace {

json layer_to_json(const BackboneLayer& l) {
  switch (l.kind) {
    case BackboneLayer::Kind::Conv:
      return {{"kind", "conv"}, {"out_c", l.out_c}, {"kh", l.kh}, {"kw", l.kw},
              {"sh", l.sh},     {"sw", l.sw},       {"ph", l.ph}, {"pw", l.pw}};
    case BackboneLayer::Kind::Pool:
      return {{"kind", "pool"}, {"kh", l.kh}, {"kw", l.kw}, {"sh", l.sh}, {"sw", l.sw}};
    case BackboneLayer::Kind::ResPair:
      return {{"kind", "res_pair"}, {"out_c", l.out_c}};
  }
  throw ConfigError("unknown backbone layer kind");
}

BackboneLayer layer_from_json(const json& j) {
  std::string kind = j.at("kind");
  if (kind == "conv")
    return BackboneLayer::conv(j.at("out_c"), j.at("kh"), j.at("kw"), j.at("sh"), j.at("sw"),
                               j.at("ph"), j.at("pw"));
  if (kind == "pool") return BackboneLayer::pool(j.at("kh"), j.at("kw"), j.at("sh"), j.at("sw"));
  if (kind == "res_pair") return BackboneLayer::res_pair(j.at("out_c"));
  throw ConfigError("unknown backbone layer kind: " + kind);
}

}  // namespace

json scatter_config_to_json(const ScatterConfig& cfg) {
  json layers = json::array();
  for (const auto& l : cfg.backbone_plan.layers) layers.push_back(layer_to_json(l));
  return {
      {"backbone", {{"preset", cfg.backbone_preset}, {"layers", layers}}},
      {"blocks", {{"count", cfg.blocks}, {"hidden_size", cfg.block_hidden}}},
      {"decoder", {{"hidden_size", cfg.decoder_hidden}, {"attn_size", cfg.attn_dim}}},
      {"lambda_ctc", cfg.lambda_ctc},
      {"lambda_attn", cfg.lambda_attn},
      {"max_len", cfg.max_len},
      {"input", {{"height", cfg.in_h}, {"width", cfg.in_w}}},
      {"tps",
       {{"fiducials_per_edge", cfg.tps.k},
        {"conv_channels", cfg.tps.conv_channels},
        {"fc_hidden", cfg.tps.fc_hidden},
        {"margin", cfg.tps.margin}}},
  };
}

ScatterConfig scatter_config_from_json(const json& j) {
  ScatterConfig cfg;
  try {
    if (j.contains("backbone")) {
      const auto& b = j.at("backbone");
      cfg.backbone_preset = b.value("preset", std::string("desk"));
      if (b.contains("layers")) {
        cfg.backbone_plan.name = cfg.backbone_preset;
        cfg.backbone_plan.layers.clear();
        for (const auto& lj : b.at("layers")) cfg.backbone_plan.layers.push_back(layer_from_json(lj));
      } else {
        cfg.backbone_plan = backbone_plan_for_preset(cfg.backbone_preset);
      }
    }
    bool full = cfg.backbone_preset == "full";
    cfg.block_hidden = full ? 256 : 64;
    cfg.decoder_hidden = full ? 256 : 64;
    cfg.attn_dim = full ? 256 : 64;
    if (j.contains("blocks")) {
      cfg.blocks = j.at("blocks").value("count", cfg.blocks);
      cfg.block_hidden = j.at("blocks").value("hidden_size", cfg.block_hidden);
    }
    if (j.contains("decoder")) {
      cfg.decoder_hidden = j.at("decoder").value("hidden_size", cfg.decoder_hidden);
      cfg.attn_dim = j.at("decoder").value("attn_size", cfg.attn_dim);
    }
    cfg.lambda_ctc = j.value("lambda_ctc", cfg.lambda_ctc);
    if (j.contains("lambda_attn")) {
      if (j.at("lambda_attn").is_number()) {
        cfg.lambda_attn.assign(cfg.blocks, j.at("lambda_attn").get<double>());
      } else {
        cfg.lambda_attn = j.at("lambda_attn").get<std::vector<double>>();
      }
    }
    cfg.max_len = j.value("max_len", cfg.max_len);
    if (j.contains("input")) {
      cfg.in_h = j.at("input").value("height", cfg.in_h);
      cfg.in_w = j.at("input").value("width", cfg.in_w);
    }
    if (j.contains("tps")) {
      const auto& t = j.at("tps");
      cfg.tps.k = t.value("fiducials_per_edge", cfg.tps.k);
      if (t.contains("conv_channels"))
        cfg.tps.conv_channels = t.at("conv_channels").get<std::vector<std::size_t>>();
      cfg.tps.fc_hidden = t.value("fc_hidden", cfg.tps.fc_hidden);
      cfg.tps.margin = t.value("margin", cfg.tps.margin);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

GenConfig gen_config_from_json(const json& j) {
  GenConfig cfg;
  try {
    cfg.alphabet = j.value("alphabet", cfg.alphabet);
    if (j.contains("length")) {
      cfg.len_min = j.at("length").value("min", cfg.len_min);
      cfg.len_max = j.at("length").value("max", cfg.len_max);
    }
    if (j.contains("counts")) {
      cfg.count_train = j.at("counts").value("train", cfg.count_train);
      cfg.count_val = j.at("counts").value("val", cfg.count_val);
      cfg.count_test = j.at("counts").value("test", cfg.count_test);
    }
    cfg.curved_fraction = j.value("curved_fraction", cfg.curved_fraction);
    if (j.contains("curvature")) {
      cfg.curvature_min = j.at("curvature").value("min", cfg.curvature_min);
      cfg.curvature_max = j.at("curvature").value("max", cfg.curvature_max);
    }
    cfg.noise = j.value("noise", cfg.noise);
    cfg.tall_fraction = j.value("tall_fraction", cfg.tall_fraction);
    cfg.scale = j.value("scale", cfg.scale);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad gen config: ") + e.what());
  }
  return cfg;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  try {
    if (j.contains("model")) cfg.model = scatter_config_from_json(j.at("model"));
    if (!j.contains("data")) throw ConfigError("train config: missing data section");
    const auto& d = j.at("data");
    if (d.contains("train")) {
      for (const auto& s : d.at("train")) {
        TrainConfig::Source src;
        if (s.is_string()) {
          src.manifest = s.get<std::string>();
        } else {
          src.manifest = s.at("manifest");
          src.weight = s.value("weight", 1.0);
        }
        cfg.train_sources.push_back(std::move(src));
      }
    }
    cfg.val_manifest = d.value("val", std::string());
    cfg.augment = d.value("augment", cfg.augment);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      cfg.batch_size = t.value("batch_size", cfg.batch_size);
      cfg.max_steps = t.value("max_steps", cfg.max_steps);
      cfg.val_interval = t.value("val_interval", cfg.val_interval);
      cfg.log_interval = t.value("log_interval", cfg.log_interval);
      cfg.early_stop_val_acc = t.value("early_stop_val_acc", cfg.early_stop_val_acc);
      cfg.early_stop_loss_ratio = t.value("early_stop_loss_ratio", cfg.early_stop_loss_ratio);
      cfg.seed = t.value("seed", cfg.seed);
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      cfg.clip_norm = o.value("clip_norm", cfg.clip_norm);
      cfg.rho = o.value("rho", cfg.rho);
      cfg.eps = o.value("eps", cfg.eps);
    }
    if (j.contains("out")) {
      cfg.checkpoint_out = j.at("out").value("checkpoint", std::string());
      cfg.metrics_out = j.at("out").value("metrics", std::string());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad train config: ") + e.what());
  }
  if (cfg.train_sources.empty()) throw ConfigError("train config: no training manifests");
  if (cfg.batch_size == 0) throw ConfigError("train config: batch_size must be positive");
  return cfg;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
}

}  // namespace scatter
