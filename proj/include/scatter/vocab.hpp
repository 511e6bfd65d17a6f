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

#ifndef SCATTER_VOCAB_HPP_
#define SCATTER_VOCAB_HPP_

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace scatter {

// The 36 case-insensitive alphanumerics, digits first then a-z. This order is
// fixed and serialized into checkpoints.
inline constexpr char kBaseAlphabet[] = "0123456789abcdefghijklmnopqrstuvwxyz";
inline constexpr std::size_t kBaseAlphabetSize = 36;

// Placeholder glyph used when rendering an [UNK] id back to text.
inline constexpr const char* kUnkGlyph = "□";  // WHITE SQUARE

enum class VocabMode { Ctc, Attn };

// Symbol vocabulary for one decoding head.
//
// ctc mode:  36 alphanumerics + [UNK] + [blank]   (38 symbols, blank last)
// attn mode: 36 alphanumerics + [GO] + [S] + [UNK] (39 symbols)
//
// [GO] is decoder-input-only and never appears in targets.
class CharVocab {
 public:
  static CharVocab build(VocabMode mode);

  VocabMode mode() const { return mode_; }
  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }
  const std::string& symbol(std::size_t id) const { return symbols_.at(id); }

  std::size_t unk_id() const { return unk_; }
  // ctc mode only.
  std::size_t blank_id() const { return blank_; }
  // attn mode only.
  std::size_t go_id() const { return go_; }
  std::size_t stop_id() const { return stop_; }

  // Maps a single lowercased codepoint to an id, or unk_id() if outside the
  // base alphabet.
  std::size_t char_id(char32_t c) const;

 private:
  VocabMode mode_ = VocabMode::Ctc;
  std::vector<std::string> symbols_;
  std::size_t unk_ = 0, blank_ = 0, go_ = 0, stop_ = 0;
};

// Index sequence for one label string.
struct LabelEncoding {
  std::vector<std::size_t> ids;
  VocabMode mode;
};

// Lowercases, maps out-of-alphabet codepoints to [UNK]; attn mode appends [S].
LabelEncoding encode_label(const std::string& text, const CharVocab& vocab);

// CTC collapse mapping B: remove adjacent duplicates first, then blanks.
std::string collapse_ctc(const std::vector<std::size_t>& path, const CharVocab& vocab);

// Renders attn-mode ids up to (excluding) the first [S]; [UNK] renders as the
// placeholder glyph.
std::string decode_ids(const std::vector<std::size_t>& ids, const CharVocab& vocab);

}  // namespace scatter

#endif  // SCATTER_VOCAB_HPP_
