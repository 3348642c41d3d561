// Copyright 2026  The cifasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CIFASR_LEXICON_H_
#define CIFASR_LEXICON_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cifasr {

// Special ids shared by the character and syllable vocabularies.
inline constexpr int kBlankId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kSosEosId = 2;
inline constexpr int kNumSpecialIds = 3;

enum class UnitKind { kCharacter, kSyllable };

struct TokenSeq {
  std::vector<int> ids;
  UnitKind unit = UnitKind::kCharacter;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  bool operator==(const TokenSeq&) const = default;
};

// Character and syllable vocabularies plus the many-to-one character →
// syllable map.  Immutable after construction.
class Lexicon {
 public:
  // One (character, syllable) pair per entry; the character must be a single
  // UTF-8 code point.  Ids follow entry order after the three specials.
  static Lexicon FromEntries(const std::vector<std::pair<std::string, std::string>>& entries);
  // UTF-8 text, one "character<TAB>syllable" pair per line.
  static Lexicon Load(const std::filesystem::path& path);
  void Save(const std::filesystem::path& path) const;

  int char_vocab_size() const { return static_cast<int>(char_symbols_.size()); }
  int syllable_vocab_size() const { return static_cast<int>(syll_symbols_.size()); }
  int vocab_size(UnitKind unit) const {
    return unit == UnitKind::kCharacter ? char_vocab_size() : syllable_vocab_size();
  }

  // kUnkId for unknown symbols.
  int CharId(std::string_view symbol) const;
  int SyllableId(std::string_view symbol) const;
  int SyllableOfChar(int char_id) const;
  const std::string& Symbol(UnitKind unit, int id) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::vector<std::string> char_symbols_;
  std::vector<std::string> syll_symbols_;
  std::unordered_map<std::string, int> char_ids_;
  std::unordered_map<std::string, int> syll_ids_;
  std::vector<int> char_to_syll_;
};

// Splits UTF-8 text into code points.  Throws FormatError on malformed input.
std::vector<std::string> SplitUtf8(std::string_view text);

TokenSeq encode_chars(std::string_view text, const Lexicon& lex);
// Length-preserving; specials map to themselves.
TokenSeq chars_to_syllables(const TokenSeq& chars, const Lexicon& lex);
// Characters concatenate; syllables are space separated.  Specials render as
// ⟨blank⟩, ⟨unk⟩, ⟨sos/eos⟩.
std::string decode_ids(const TokenSeq& seq, const Lexicon& lex);

}  // namespace cifasr

#endif  // CIFASR_LEXICON_H_
