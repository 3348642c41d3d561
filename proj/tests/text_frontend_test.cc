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

#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "cifasr/errors.h"
#include "cifasr/lexicon.h"
#include "cifasr/synth.h"

namespace cifasr {
namespace {

namespace fs = std::filesystem;

fs::path WriteFile(const std::string& name, const std::string& text) {
  const fs::path path = fs::temp_directory_path() / ("cifasr_lex_" + name);
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

Lexicon Abc() { return Lexicon::Load(WriteFile("abc.tsv", "A\tsy1\nB\tsy1\nC\tsy2\n")); }

TEST(Lexicon, LoadAssignsIdsInFileOrder) {
  const Lexicon lex = Abc();
  EXPECT_EQ(lex.char_vocab_size(), 3 + 3);
  EXPECT_EQ(lex.syllable_vocab_size(), 2 + 3);
  EXPECT_EQ(lex.CharId("A"), 3);
  EXPECT_EQ(lex.CharId("C"), 5);
  EXPECT_EQ(lex.SyllableId("sy2"), 4);
  EXPECT_EQ(lex.SyllableOfChar(lex.CharId("B")), lex.SyllableId("sy1"));
}

TEST(Lexicon, SpecialsShareIdsInBothVocabularies) {
  const Lexicon lex = Abc();
  EXPECT_EQ(kBlankId, 0);
  for (UnitKind unit : {UnitKind::kCharacter, UnitKind::kSyllable}) {
    EXPECT_EQ(lex.Symbol(unit, kBlankId), "⟨blank⟩");
    EXPECT_EQ(lex.Symbol(unit, kUnkId), "⟨unk⟩");
    EXPECT_EQ(lex.Symbol(unit, kSosEosId), "⟨sos/eos⟩");
  }
}

TEST(Lexicon, MalformedFilesAreFormatErrors) {
  EXPECT_THROW(Lexicon::Load(WriteFile("empty.tsv", "")), FormatError);
  EXPECT_THROW(Lexicon::Load(WriteFile("dup.tsv", "A\tsy1\nA\tsy2\n")), FormatError);
  EXPECT_THROW(Lexicon::Load(WriteFile("nosyl.tsv", "A\tsy1\nB\n")), FormatError);
  EXPECT_THROW(Lexicon::Load(fs::temp_directory_path() / "cifasr_lex_missing.tsv"), Error);
}

TEST(Lexicon, IdsStableAcrossLoads) {
  const fs::path path = WriteFile("stable.tsv", "甲\tjia\n乙\tyi\n丙\tbing\n丁\tding\n");
  const Lexicon a = Lexicon::Load(path);
  const Lexicon b = Lexicon::Load(path);
  for (const auto& [ch, sy] : a.entries()) {
    EXPECT_EQ(a.CharId(ch), b.CharId(ch));
    EXPECT_EQ(a.SyllableId(sy), b.SyllableId(sy));
  }
}

TEST(Lexicon, SaveLoadRoundTrip) {
  const Lexicon lex = MakeSyntheticLexicon(40, 24, 3);
  const fs::path path = fs::temp_directory_path() / "cifasr_lex_round.tsv";
  lex.Save(path);
  const Lexicon back = Lexicon::Load(path);
  EXPECT_EQ(back.entries(), lex.entries());
}

TEST(EncodeChars, LookupUnknownAndEmpty) {
  const Lexicon lex = Abc();
  EXPECT_EQ(encode_chars("ABC", lex).ids, (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(encode_chars("AXZ", lex).ids, (std::vector<int>{3, kUnkId, kUnkId}));
  EXPECT_TRUE(encode_chars("", lex).empty());
}

TEST(CharsToSyllables, MapsElementwise) {
  const Lexicon lex = Abc();
  const TokenSeq s = chars_to_syllables(encode_chars("ABC", lex), lex);
  EXPECT_EQ(s.unit, UnitKind::kSyllable);
  EXPECT_EQ(s.ids, (std::vector<int>{3, 3, 4}));
  const TokenSeq unk = chars_to_syllables(TokenSeq{{kUnkId}, UnitKind::kCharacter}, lex);
  EXPECT_EQ(unk.ids, (std::vector<int>{kUnkId}));
}

TEST(CharsToSyllables, PreservesLengthOnRandomSequences) {
  const Lexicon lex = MakeSyntheticLexicon(40, 24, 9);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> id(0, lex.char_vocab_size() - 1);
  std::uniform_int_distribution<int> len(0, 30);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSeq chars;
    chars.ids.resize(len(rng));
    for (int& c : chars.ids) c = id(rng);
    EXPECT_EQ(chars_to_syllables(chars, lex).size(), chars.size());
  }
}

TEST(DecodeIds, RoundTripAndSpecials) {
  const Lexicon lex = Abc();
  EXPECT_EQ(decode_ids(encode_chars("ABC", lex), lex), "ABC");
  EXPECT_EQ(decode_ids(TokenSeq{{kUnkId}, UnitKind::kCharacter}, lex), "⟨unk⟩");
  EXPECT_EQ(decode_ids(chars_to_syllables(encode_chars("AC", lex), lex), lex), "sy1 sy2");
  EXPECT_THROW(decode_ids(TokenSeq{{9999}, UnitKind::kCharacter}, lex), ContractError);
}

TEST(DecodeIds, RoundTripOverRandomTextOfTheAlphabet) {
  const Lexicon lex = MakeSyntheticLexicon(40, 24, 5);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, lex.entries().size() - 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::string text;
    for (int i = 0; i < 12; ++i) text += lex.entries()[pick(rng)].first;
    EXPECT_EQ(decode_ids(encode_chars(text, lex), lex), text);
  }
}

TEST(SplitUtf8, RejectsMalformedInput) {
  EXPECT_EQ(SplitUtf8("a甲b").size(), 3u);
  EXPECT_THROW(SplitUtf8(std::string("\xe7\x94", 2)), FormatError);
}

}  // namespace
}  // namespace cifasr
