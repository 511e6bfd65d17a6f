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

#include "scatter/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

#include "scatter/config.hpp"

namespace scatter {

using nlohmann::json;

namespace {

constexpr char kMagic[] = "SCTR1\n";
constexpr std::size_t kMagicLen = 6;

json manifest_entry(const std::string& name, const Shape& shape) {
  return {{"name", name}, {"dtype", "f32"}, {"shape", shape}};
}

void write_f32(std::ofstream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_f32(std::ifstream& in, std::size_t count, const std::string& what) {
  std::vector<float> v(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
    throw IoError("truncated checkpoint while reading " + what);
  return v;
}

}  // namespace

void save_checkpoint(const ScatterModel<float>& model, const AdaDeltaState* optim,
                     const TrainingMeta& meta, const std::string& path) {
  json header;
  header["format_version"] = 1;
  header["build"] = build_name(model.build());
  header["config"] = scatter_config_to_json(model.config());
  header["vocab"] = {{"ctc", model.ctc_vocab().symbols()}, {"attn", model.attn_vocab().symbols()}};
  json params = json::array();
  for (const auto& p : model.params().all())
    params.push_back(manifest_entry(p.name, p.tensor.shape()));
  header["params"] = params;
  if (optim) {
    json optim_manifest = json::array();
    const auto& all = model.params().all();
    for (std::size_t i = 0; i < all.size(); ++i) {
      optim_manifest.push_back(manifest_entry("optim.eg2." + all[i].name, all[i].tensor.shape()));
      optim_manifest.push_back(manifest_entry("optim.edx2." + all[i].name, all[i].tensor.shape()));
    }
    header["optim"] = {{"rho", optim->rho}, {"eps", optim->eps}, {"buffers", optim_manifest}};
  }
  header["meta"] = {{"seed", meta.seed},
                    {"step", meta.step},
                    {"best_val_acc", meta.best_val_acc},
                    {"dataset_hash", meta.dataset_hash},
                    {"model_seed", model.seed()}};

  std::string header_str = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out.write(kMagic, kMagicLen);
  std::uint64_t len = header_str.size();
  unsigned char len_le[8];
  for (int i = 0; i < 8; ++i) len_le[i] = static_cast<unsigned char>((len >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(len_le), 8);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& p : model.params().all()) write_f32(out, p.tensor.data());
  if (optim) {
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      write_f32(out, optim->eg2[i]);
      write_f32(out, optim->edx2[i]);
    }
  }
  if (!out) throw IoError("write failure on checkpoint " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[kMagicLen];
  in.read(magic, kMagicLen);
  if (static_cast<std::size_t>(in.gcount()) != kMagicLen ||
      std::memcmp(magic, kMagic, kMagicLen) != 0)
    throw IoError("bad checkpoint magic in " + path + " (expected SCTR1)");
  unsigned char len_le[8];
  in.read(reinterpret_cast<char*>(len_le), 8);
  if (in.gcount() != 8) throw IoError("truncated checkpoint header length in " + path);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(len_le[i]) << (8 * i);
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (static_cast<std::uint64_t>(in.gcount()) != len)
    throw IoError("truncated checkpoint header in " + path);

  json header;
  try {
    header = json::parse(header_str);
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path + ": " + e.what());
  }

  LoadedCheckpoint result;
  try {
    if (header.at("format_version").get<int>() != 1)
      throw IoError("unsupported checkpoint format_version in " + path);
    ScatterConfig cfg = scatter_config_from_json(header.at("config"));
    ScatterBuild build = build_from_name(header.at("build"));
    result.meta.seed = header.at("meta").value("seed", 0ULL);
    result.meta.step = header.at("meta").value("step", std::size_t{0});
    result.meta.best_val_acc = header.at("meta").value("best_val_acc", -1.0);
    result.meta.dataset_hash = header.at("meta").value("dataset_hash", 0ULL);
    std::uint64_t model_seed = header.at("meta").value("model_seed", 0ULL);
    result.model = std::make_unique<ScatterModel<float>>(cfg, build, model_seed);

    // vocab order is serialized so decodes stay stable across versions
    auto ctc_syms = header.at("vocab").at("ctc").get<std::vector<std::string>>();
    auto attn_syms = header.at("vocab").at("attn").get<std::vector<std::string>>();
    if (ctc_syms != result.model->ctc_vocab().symbols() ||
        attn_syms != result.model->attn_vocab().symbols())
      throw IoError("checkpoint vocab order differs from this build's vocab in " + path);

    const auto& manifest = header.at("params");
    auto& reg = result.model->params();
    if (manifest.size() != reg.size())
      throw IoError("checkpoint parameter count " + std::to_string(manifest.size()) +
                    " does not match model (" + std::to_string(reg.size()) + ") in " + path);
    for (std::size_t i = 0; i < reg.size(); ++i) {
      const auto& entry = manifest.at(i);
      std::string name = entry.at("name");
      if (entry.at("dtype").get<std::string>() != "f32")
        throw IoError("unsupported dtype for parameter " + name + " in " + path);
      auto& p = reg.all()[i];
      if (p.name != name)
        throw IoError("checkpoint parameter order mismatch at index " + std::to_string(i) +
                      ": " + name + " vs " + p.name);
      Shape shape = entry.at("shape").get<Shape>();
      if (shape != p.tensor.shape())
        throw IoError("shape mismatch for parameter " + name + " in " + path);
      p.tensor.data() = read_f32(in, shape_numel(shape), "parameter " + name);
    }

    if (header.contains("optim")) {
      AdaDeltaState st;
      st.rho = header.at("optim").value("rho", 0.95);
      st.eps = header.at("optim").value("eps", 1e-6);
      st.eg2.resize(reg.size());
      st.edx2.resize(reg.size());
      const auto& buffers = header.at("optim").at("buffers");
      if (buffers.size() != 2 * reg.size())
        throw IoError("optimizer buffer count mismatch in " + path);
      for (std::size_t i = 0; i < reg.size(); ++i) {
        std::size_t n = reg.all()[i].tensor.numel();
        st.eg2[i] = read_f32(in, n, "optim.eg2." + reg.all()[i].name);
        st.edx2[i] = read_f32(in, n, "optim.edx2." + reg.all()[i].name);
      }
      result.optim = std::move(st);
    }
  } catch (const json::exception& e) {
    throw IoError("corrupt checkpoint field in " + path + ": " + e.what());
  }
  return result;
}

}  // namespace scatter
