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

#include "scatter/vocab.hpp"

#include "scatter/errors.hpp"

namespace scatter {

namespace {

// Minimal UTF-8 decoding; malformed bytes decode as single replacement
// codepoints so labels never abort the pipeline.
std::vector<char32_t> utf8_codepoints(const std::string& s) {
  std::vector<char32_t> out;
  std::size_t i = 0;
  while (i < s.size()) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0xFFFD;
    std::size_t len = 1;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6 && i + 1 < s.size()) {
      cp = static_cast<char32_t>((c & 0x1F) << 6 | (s[i + 1] & 0x3F));
      len = 2;
    } else if ((c >> 4) == 0xE && i + 2 < s.size()) {
      cp = static_cast<char32_t>((c & 0x0F) << 12 | (s[i + 1] & 0x3F) << 6 | (s[i + 2] & 0x3F));
      len = 3;
    } else if ((c >> 3) == 0x1E && i + 3 < s.size()) {
      cp = static_cast<char32_t>((c & 0x07) << 18 | (s[i + 1] & 0x3F) << 12 |
                                 (s[i + 2] & 0x3F) << 6 | (s[i + 3] & 0x3F));
      len = 4;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

}  // namespace

CharVocab CharVocab::build(VocabMode mode) {
  CharVocab v;
  v.mode_ = mode;
  for (std::size_t i = 0; i < kBaseAlphabetSize; ++i)
    v.symbols_.push_back(std::string(1, kBaseAlphabet[i]));
  if (mode == VocabMode::Ctc) {
    v.unk_ = v.symbols_.size();
    v.symbols_.push_back("[UNK]");
    v.blank_ = v.symbols_.size();
    v.symbols_.push_back("[blank]");
  } else {
    v.go_ = v.symbols_.size();
    v.symbols_.push_back("[GO]");
    v.stop_ = v.symbols_.size();
    v.symbols_.push_back("[S]");
    v.unk_ = v.symbols_.size();
    v.symbols_.push_back("[UNK]");
  }
  return v;
}

std::size_t CharVocab::char_id(char32_t c) const {
  if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
  if (c >= U'0' && c <= U'9') return static_cast<std::size_t>(c - U'0');
  if (c >= U'a' && c <= U'z') return 10 + static_cast<std::size_t>(c - U'a');
  return unk_;
}

LabelEncoding encode_label(const std::string& text, const CharVocab& vocab) {
  LabelEncoding enc;
  enc.mode = vocab.mode();
  for (char32_t cp : utf8_codepoints(text)) enc.ids.push_back(vocab.char_id(cp));
  if (vocab.mode() == VocabMode::Attn) enc.ids.push_back(vocab.stop_id());
  return enc;
}

std::string collapse_ctc(const std::vector<std::size_t>& path, const CharVocab& vocab) {
  if (vocab.mode() != VocabMode::Ctc) throw ContractError("collapse_ctc needs a ctc vocab");
  std::string out;
  std::size_t prev = vocab.size();  // sentinel
  for (std::size_t id : path) {
    if (id >= vocab.size()) throw ContractError("collapse_ctc: id out of range");
    if (id != prev && id != vocab.blank_id())
      out += (id == vocab.unk_id()) ? kUnkGlyph : vocab.symbol(id);
    prev = id;
  }
  return out;
}

std::string decode_ids(const std::vector<std::size_t>& ids, const CharVocab& vocab) {
  if (vocab.mode() != VocabMode::Attn) throw ContractError("decode_ids needs an attn vocab");
  std::string out;
  for (std::size_t id : ids) {
    if (id >= vocab.size()) throw ContractError("decode_ids: id out of range");
    if (id == vocab.stop_id()) break;
    if (id == vocab.go_id()) continue;
    out += (id == vocab.unk_id()) ? kUnkGlyph : vocab.symbol(id);
  }
  return out;
}

}  // namespace scatter
