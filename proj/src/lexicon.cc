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

#include "cifasr/lexicon.h"

#include <fstream>

#include "cifasr/errors.h"

namespace cifasr {

namespace {

const std::vector<std::string>& SpecialSymbols() {
  static const std::vector<std::string> kSpecials = {"⟨blank⟩", "⟨unk⟩", "⟨sos/eos⟩"};
  return kSpecials;
}

int CodePointLength(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 0;
}

}  // namespace

std::vector<std::string> SplitUtf8(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const int n = CodePointLength(static_cast<unsigned char>(text[i]));
    if (n == 0 || i + n > text.size()) throw FormatError("malformed UTF-8 text");
    for (int k = 1; k < n; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        throw FormatError("malformed UTF-8 text");
      }
    }
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

Lexicon Lexicon::FromEntries(const std::vector<std::pair<std::string, std::string>>& entries) {
  if (entries.empty()) throw FormatError("lexicon has no entries");
  Lexicon lex;
  lex.char_symbols_ = SpecialSymbols();
  lex.syll_symbols_ = SpecialSymbols();
  lex.char_to_syll_ = {kBlankId, kUnkId, kSosEosId};
  for (int i = 0; i < kNumSpecialIds; ++i) {
    lex.char_ids_.emplace(lex.char_symbols_[i], i);
    lex.syll_ids_.emplace(lex.syll_symbols_[i], i);
  }
  for (const auto& [ch, syll] : entries) {
    if (ch.empty()) throw FormatError("lexicon entry with empty character");
    if (syll.empty()) throw FormatError("lexicon entry '" + ch + "' has no syllable");
    if (SplitUtf8(ch).size() != 1) {
      throw FormatError("lexicon character '" + ch + "' is not a single code point");
    }
    if (lex.char_ids_.contains(ch)) throw FormatError("duplicate lexicon character '" + ch + "'");
    auto [it, inserted] = lex.syll_ids_.try_emplace(syll, lex.syllable_vocab_size());
    if (inserted) lex.syll_symbols_.push_back(syll);
    lex.char_ids_.emplace(ch, lex.char_vocab_size());
    lex.char_symbols_.push_back(ch);
    lex.char_to_syll_.push_back(it->second);
  }
  lex.entries_ = entries;
  return lex;
}

Lexicon Lexicon::Load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open lexicon " + path.string());
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab + 1 >= line.size()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": missing syllable column");
    }
    entries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  try {
    return FromEntries(entries);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void Lexicon::Save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write lexicon " + path.string());
  for (const auto& [ch, syll] : entries_) os << ch << '\t' << syll << '\n';
}

int Lexicon::CharId(std::string_view symbol) const {
  auto it = char_ids_.find(std::string(symbol));
  return it == char_ids_.end() ? kUnkId : it->second;
}

int Lexicon::SyllableId(std::string_view symbol) const {
  auto it = syll_ids_.find(std::string(symbol));
  return it == syll_ids_.end() ? kUnkId : it->second;
}

int Lexicon::SyllableOfChar(int char_id) const {
  if (char_id < 0 || char_id >= char_vocab_size()) {
    throw ContractError("character id " + std::to_string(char_id) + " out of range");
  }
  return char_to_syll_[char_id];
}

const std::string& Lexicon::Symbol(UnitKind unit, int id) const {
  const auto& table = unit == UnitKind::kCharacter ? char_symbols_ : syll_symbols_;
  if (id < 0 || id >= static_cast<int>(table.size())) {
    throw ContractError("token id " + std::to_string(id) + " out of range [0, " +
                        std::to_string(table.size()) + ")");
  }
  return table[id];
}

TokenSeq encode_chars(std::string_view text, const Lexicon& lex) {
  TokenSeq seq;
  seq.unit = UnitKind::kCharacter;
  for (const auto& cp : SplitUtf8(text)) seq.ids.push_back(lex.CharId(cp));
  return seq;
}

TokenSeq chars_to_syllables(const TokenSeq& chars, const Lexicon& lex) {
  if (chars.unit != UnitKind::kCharacter) throw ContractError("expected a character sequence");
  TokenSeq out;
  out.unit = UnitKind::kSyllable;
  out.ids.reserve(chars.size());
  for (int id : chars.ids) out.ids.push_back(lex.SyllableOfChar(id));
  return out;
}

std::string decode_ids(const TokenSeq& seq, const Lexicon& lex) {
  std::string out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (seq.unit == UnitKind::kSyllable && i > 0) out += ' ';
    out += lex.Symbol(seq.unit, seq.ids[i]);
  }
  return out;
}

}  // namespace cifasr
