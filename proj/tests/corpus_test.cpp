#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "comment_judge/corpus.hpp"
#include "comment_judge/dataset_io.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

namespace cj = comment_judge;
using cj::testing::TempDir;

namespace {

cj::CodeCommentPair make(std::string id, std::string comment, std::string code, std::optional<cj::Label> label,
                         cj::Source source = cj::Source::Seed, std::optional<cj::Split> split = std::nullopt) {
  return {std::move(id), std::move(comment), std::move(code), label, source, split};
}

const std::string kHeader = "id,comment,code,label,source,split\n";

}  // namespace

TEST(LoadDataset, TableOneRow) {
  const auto d = cj::parse_dataset(
      kHeader + "p1,/* Swap two values */,\"void swapValues(int *x, int *y){int temp; temp = *x; *x = *y; *y = temp;}\",Useful,seed,\n",
      cj::DatasetFormat::Csv);
  ASSERT_EQ(d.pairs.size(), 1u);
  EXPECT_EQ(d.pairs[0].label, cj::Label::Useful);
  EXPECT_EQ(d.pairs[0].comment_text, "/* Swap two values */");
  EXPECT_FALSE(d.pairs[0].split.has_value());
}

TEST(LoadDataset, EmptyFileWithHeader) {
  EXPECT_TRUE(cj::parse_dataset(kHeader, cj::DatasetFormat::Csv).pairs.empty());
  EXPECT_TRUE(cj::parse_dataset("", cj::DatasetFormat::Jsonl).pairs.empty());
}

TEST(LoadDataset, DuplicateIdNamed) {
  const std::string csv = kHeader + "p1,a comment,code,Useful,seed,\np1,another,code,Useful,seed,\n";
  try {
    cj::parse_dataset(csv, cj::DatasetFormat::Csv);
    FAIL() << "expected DataError";
  } catch (const cj::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("\"p1\""), std::string::npos) << e.what();
  }
  const std::string jsonl = R"({"id":"p1","comment":"a","code":"","label":null,"source":"seed","split":null})"
                            "\n"
                            R"({"id":"p1","comment":"b","code":"","label":null,"source":"seed","split":null})";
  EXPECT_THROW(cj::parse_dataset(jsonl, cj::DatasetFormat::Jsonl), cj::DataError);
}

TEST(LoadDataset, UnknownLabelAndMissingLabel) {
  EXPECT_THROW(cj::parse_dataset(kHeader + "p1,c,code,useful,seed,\n", cj::DatasetFormat::Csv), cj::DataError);
  const auto d = cj::parse_dataset(kHeader + "p1,c,code,,extracted,\n", cj::DatasetFormat::Csv);
  EXPECT_FALSE(d.pairs[0].label.has_value());
  EXPECT_EQ(d.pairs[0].source, cj::Source::Extracted);
}

TEST(LoadDataset, MalformedRowReportsRowNumber) {
  try {
    cj::parse_dataset(kHeader + "p1,c,code,Useful,seed,\np2,c,code\n", cj::DatasetFormat::Csv);
    FAIL();
  } catch (const cj::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
  try {
    cj::parse_dataset("{\"id\":\"a\",\"comment\":\"x\"}\n{not json\n", cj::DatasetFormat::Jsonl);
    FAIL();
  } catch (const cj::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, RejectsBlankComment) {
  EXPECT_THROW(cj::parse_dataset(kHeader + "p1,\"  \",code,Useful,seed,\n", cj::DatasetFormat::Csv), cj::DataError);
}

TEST(LoadDataset, RejectsPartiallySplitLabeledData) {
  const std::string csv = kHeader + "p1,a,x,Useful,seed,train\np2,b,y,Useful,seed,\n";
  EXPECT_THROW(cj::parse_dataset(csv, cj::DatasetFormat::Csv), cj::DataError);
}

TEST(SaveDataset, RoundTripBothFormats) {
  cj::Dataset d;
  d.pairs.push_back(make("a", "Swap two values", "void swap(int*a,int*b){}", cj::Label::Useful, cj::Source::Seed,
                         cj::Split::Train));
  d.pairs.push_back(make("b", "line one\nline \"two\", quoted", "", cj::Label::NotUseful, cj::Source::Generated,
                         cj::Split::Test));
  d.pairs.push_back(make("c", "trailing spaces  ", "\r\nx = 1;\r\n", std::nullopt, cj::Source::Extracted,
                         cj::Split::Validation));
  TempDir dir;
  for (auto fmt : {cj::DatasetFormat::Csv, cj::DatasetFormat::Jsonl}) {
    const auto path = dir / (fmt == cj::DatasetFormat::Csv ? "d.csv" : "d.jsonl");
    cj::save_dataset(d, path, fmt);
    EXPECT_EQ(cj::load_dataset(path, fmt), d);
  }
}

TEST(SaveDataset, UnwritablePathIsIoError) {
  cj::Dataset d;
  EXPECT_THROW(cj::save_dataset(d, "/nonexistent-dir/sub/d.jsonl", cj::DatasetFormat::Jsonl), cj::IoError);
}

// Randomized strings drawn from an alphabet heavy in CSV/JSON metacharacters
// and multi-byte UTF-8.
TEST(SaveDataset, RoundTripPropertyRandomContent) {
  const std::vector<std::string> alphabet{"a", "Z", " ", ",", "\"", "\n", "\r", "\t", "\\", "/*", "*/",
                                          "é", "∑", "🙂", "'", "{", "}", "\r\n", "0"};
  cj::Rng rng(20241212);
  const auto random_text = [&](std::size_t max_len, bool nonblank) {
    std::string s;
    const auto len = cj::uniform_index(rng, max_len + 1);
    for (std::size_t i = 0; i < len; ++i) s += alphabet[cj::uniform_index(rng, alphabet.size())];
    if (nonblank) s += "x";
    return s;
  };
  TempDir dir;
  for (int round = 0; round < 25; ++round) {
    cj::Dataset d;
    const auto n = cj::uniform_index(rng, 8);
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = cj::uniform_index(rng, 3);
      d.pairs.push_back(make("id" + std::to_string(i) + random_text(3, false), random_text(40, true),
                             random_text(60, false),
                             l == 2 ? std::nullopt : std::optional<cj::Label>(static_cast<cj::Label>(l)),
                             static_cast<cj::Source>(cj::uniform_index(rng, 3)),
                             static_cast<cj::Split>(cj::uniform_index(rng, 3))));
    }
    for (auto fmt : {cj::DatasetFormat::Csv, cj::DatasetFormat::Jsonl}) {
      const auto path = dir / "rt.data";
      cj::save_dataset(d, path, fmt);
      const auto bytes = cj::read_file(path);
      const auto back = cj::load_dataset(path, fmt);
      ASSERT_EQ(back, d) << "round " << round;
      // Saving the reloaded dataset reproduces the file byte for byte.
      EXPECT_EQ(cj::serialize_dataset(back, fmt), bytes);
    }
  }
}

TEST(Counts, DerivedFromPairs) {
  cj::Dataset d;
  d.pairs.push_back(make("a", "x", "", cj::Label::Useful, cj::Source::Seed, cj::Split::Train));
  d.pairs.push_back(make("b", "y", "", cj::Label::NotUseful, cj::Source::Generated, cj::Split::Train));
  d.pairs.push_back(make("c", "z", "", cj::Label::Useful, cj::Source::Seed, cj::Split::Test));
  const auto c = d.counts();
  EXPECT_EQ(c.total(), 3u);
  EXPECT_EQ(c.count(cj::Label::Useful), 2u);
  EXPECT_EQ(c.count(std::nullopt, cj::Source::Generated), 1u);
  EXPECT_EQ(c.count(cj::Label::Useful, cj::Source::Seed, cj::Split::Test), 1u);
  EXPECT_EQ(c.unlabeled(), 0u);
}

namespace {

cj::Dataset labeled(std::size_t useful, std::size_t not_useful) {
  cj::Dataset d;
  for (std::size_t i = 0; i < useful + not_useful; ++i) {
    d.pairs.push_back(make("p" + std::to_string(i), "comment " + std::to_string(i), "x;",
                           i < useful ? cj::Label::Useful : cj::Label::NotUseful));
  }
  return d;
}

std::size_t in_split(const cj::Dataset& d, cj::Split s, std::optional<cj::Label> l = std::nullopt) {
  return d.counts().count(l, std::nullopt, s);
}

}  // namespace

TEST(StratifiedSplit, FullScaleTestSize) {
  const auto d = cj::stratified_split(labeled(5378, 3670), {0.19, 0.10}, 7);
  const auto test = in_split(d, cj::Split::Test);
  EXPECT_TRUE(test == 1718 || test == 1719) << test;
  EXPECT_EQ(d.counts().unsplit(), 0u);
}

TEST(StratifiedSplit, TenPairsEqualLabelCounts) {
  const auto d = cj::stratified_split(labeled(5, 5), {0.2, 0.2}, 3);
  for (auto s : {cj::Split::Train, cj::Split::Validation, cj::Split::Test}) {
    EXPECT_EQ(in_split(d, s, cj::Label::Useful), in_split(d, s, cj::Label::NotUseful));
  }
  EXPECT_EQ(in_split(d, cj::Split::Test), 2u);
  EXPECT_EQ(in_split(d, cj::Split::Validation), 2u);
  EXPECT_EQ(in_split(d, cj::Split::Train), 6u);
}

TEST(StratifiedSplit, DeterministicInSeed) {
  const auto base = labeled(40, 27);
  EXPECT_EQ(cj::stratified_split(base, {}, 11), cj::stratified_split(base, {}, 11));
  EXPECT_NE(cj::stratified_split(base, {}, 11), cj::stratified_split(base, {}, 12));
}

TEST(StratifiedSplit, StratificationProperty) {
  cj::Rng rng(99);
  for (int round = 0; round < 200; ++round) {
    const auto u = 1 + cj::uniform_index(rng, 60);
    const auto nu = 1 + cj::uniform_index(rng, 60);
    const double test = 0.05 + 0.4 * cj::uniform01(rng);
    const double val = 0.05 + (0.9 - test) * 0.5 * cj::uniform01(rng);
    const auto d = cj::stratified_split(labeled(u, nu), {test, val}, rng());
    const double n = static_cast<double>(u + nu);
    const double global_useful = static_cast<double>(u) / n;
    for (auto [s, f] : {std::pair{cj::Split::Test, test}, std::pair{cj::Split::Validation, val}}) {
      const auto size = in_split(d, s);
      EXPECT_EQ(size, static_cast<std::size_t>(std::llround(n * f)));
      const double expected_useful = global_useful * static_cast<double>(size);
      EXPECT_LE(std::abs(static_cast<double>(in_split(d, s, cj::Label::Useful)) - expected_useful), 1.0 + 1e-9)
          << "round " << round;
    }
  }
}

TEST(StratifiedSplit, Errors) {
  auto d = labeled(3, 3);
  EXPECT_THROW(cj::stratified_split(d, {0.0, 0.1}, 1), cj::UsageError);
  EXPECT_THROW(cj::stratified_split(d, {0.6, 0.5}, 1), cj::UsageError);
  d.pairs[0].label.reset();
  EXPECT_THROW(cj::stratified_split(d, {}, 1), cj::DataError);
}

TEST(Merge, FullScaleCountsWithoutDuplicates) {
  const auto seed = cj::testing::synthetic_corpus(9048, 1, "s");
  auto gen = cj::testing::synthetic_corpus(1437 + 9048, 1, "g");
  // Keep only generated pairs that cannot collide with the seed.
  gen.pairs.erase(gen.pairs.begin(), gen.pairs.begin() + 9048);
  for (auto& p : gen.pairs) p.source = cj::Source::Generated;
  const auto r = cj::merge_datasets(seed, gen);
  EXPECT_EQ(r.dataset.pairs.size(), 10485u);
  EXPECT_EQ(r.duplicates_dropped, 0u);
}

TEST(Merge, EmptyGeneratedIsIdentity) {
  const auto seed = cj::testing::synthetic_corpus(20, 4);
  EXPECT_EQ(cj::merge_datasets(seed, {}).dataset, seed);
}

TEST(Merge, WhitespaceVariantIsDuplicate) {
  cj::Dataset seed;
  seed.pairs.push_back(make("s1", "Swap two values", "void swap(int *x, int *y);", cj::Label::Useful));
  cj::Dataset gen;
  gen.pairs.push_back(make("g1", "  swap   TWO values\n", "void swap(int *x,\n   int *y);  ", cj::Label::Useful,
                           cj::Source::Generated));
  gen.pairs.push_back(make("s1", "Something new", "int y;", cj::Label::NotUseful, cj::Source::Generated));
  const auto r = cj::merge_datasets(seed, gen);
  EXPECT_EQ(r.duplicates_dropped, 1u);
  ASSERT_EQ(r.dataset.pairs.size(), 2u);
  EXPECT_EQ(r.dataset.pairs[1].id, "s1-g1");
  EXPECT_EQ(r.dataset.pairs[1].source, cj::Source::Generated);
  EXPECT_EQ(r.rekeyed, 1u);
}

TEST(Merge, Idempotent) {
  auto a = cj::testing::synthetic_corpus(30, 5, "a");
  auto b = cj::testing::synthetic_corpus(30, 6, "a");  // ids collide, some content may too
  for (auto& p : b.pairs) p.source = cj::Source::Generated;
  const auto once = cj::merge_datasets(a, b).dataset;
  EXPECT_EQ(cj::merge_datasets(once, b).dataset, once);
}

TEST(Merge, GeneratedPairsJoinTrainingSplitOfSplitSeed) {
  const auto seed = cj::stratified_split(cj::testing::synthetic_corpus(20, 8), {}, 1);
  cj::Dataset gen;
  gen.pairs.push_back(make("g1", "new comment", "int q;", cj::Label::Useful, cj::Source::Generated, cj::Split::Test));
  const auto merged = cj::merge_datasets(seed, gen).dataset;
  EXPECT_EQ(merged.pairs.back().split, cj::Split::Train);
  EXPECT_NO_THROW(cj::validate(merged));
}
