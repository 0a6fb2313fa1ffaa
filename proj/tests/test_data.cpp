#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>

#include "sft/dataset.hpp"
#include "sft/error.hpp"
#include "sft/fileio.hpp"
#include "sft/tokenizer.hpp"

using namespace sft;
using namespace sft::data;

namespace {

const std::filesystem::path kData = std::filesystem::path(SFT_SOURCE_DIR) / "data";
const std::filesystem::path kFixtures = std::filesystem::path(SFT_SOURCE_DIR) / "tests" / "fixtures";

std::filesystem::path scratch() {
  auto dir = std::filesystem::temp_directory_path() / "sft_test_data";
  std::filesystem::create_directories(dir);
  return dir;
}

Dataset toy_dataset(std::size_t n, std::size_t minority) {
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) ds.examples.push_back({std::to_string(i), "t" + std::to_string(i), {i < minority ? 1 : 0}});
  return ds;
}

}  // namespace

TEST_CASE("bpe merges greedily by rank") {
  Tokenizer tok({"a", "b", "aa", "aab", "<pad>"}, {{"a", "a"}, {"aa", "b"}}, 4);
  CHECK(tok.encode("") .empty());
  CHECK(tok.encode("aab") == std::vector<std::int32_t>{3});
  CHECK(tok.encode("aaab") == std::vector<std::int32_t>{2, 0, 1});
  CHECK(tok.encode("ba") == std::vector<std::int32_t>{1, 0});
  CHECK(tok.decode(tok.encode("aabab")) == "aabab");
  CHECK_THROWS_AS(tok.encode("abc"), TokenizerError);
  CHECK_THROWS_AS(Tokenizer({"a", "a"}, {}, 0), TokenizerError);
  CHECK_THROWS_AS(Tokenizer({"a", "b"}, {{"a", "b"}}, 0), TokenizerError);
}

TEST_CASE("byte level tokenizer") {
  const auto tok = Tokenizer::byte_level();
  CHECK(tok.vocab_size() == 256);
  CHECK(tok.pad_id() == 255);
  const std::string text = "No acute process; épanchement 4 cm.\n";
  const auto ids = tok.encode(text);
  CHECK(ids.size() == text.size());
  CHECK(tok.decode(ids) == text);
  const auto shipped = Tokenizer::load(kData / "byte_tokenizer.json");
  CHECK(shipped.vocab_size() == 256);
  CHECK(shipped.encode(text) == ids);
}

TEST_CASE("tokenizer file round trip with fallback") {
  const auto tok = Tokenizer::load(kFixtures / "bpe_tokenizer.json");
  const std::string text = "no pneumothorax, mild edema.";
  const auto ids = tok.encode(text);
  CHECK(tok.decode(ids) == text);
  CHECK(ids.size() < text.size());
  const auto path = scratch() / "tok.json";
  tok.save(path);
  const auto again = Tokenizer::load(path);
  CHECK(again.encode(text) == ids);
  CHECK(unescape_token(escape_token(std::string("\x01\\a\xff", 4))) == std::string("\x01\\a\xff", 4));
}

TEST_CASE("pad and truncate") {
  auto r = pad_truncate({1, 2, 3, 4, 5}, 3, 0);
  CHECK(r.ids == std::vector<std::int32_t>{1, 2, 3});
  CHECK(r.mask == std::vector<std::uint8_t>{1, 1, 1});
  r = pad_truncate({1, 2}, 4, 9);
  CHECK(r.ids == std::vector<std::int32_t>{1, 2, 9, 9});
  CHECK(r.mask == std::vector<std::uint8_t>{1, 1, 0, 0});
  r = pad_truncate({7, 8, 9}, 3, 0);
  CHECK(r.ids == std::vector<std::int32_t>{7, 8, 9});
  CHECK_THROWS_AS(pad_truncate({}, 3, 0), ContractError);
}

TEST_CASE("split sizes and partition") {
  auto s = random_split(10, 1);
  CHECK(s.train.size() == 7);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 2);
  s = random_split(100, 1);
  CHECK(s.train.size() == 70);
  CHECK(s.val.size() == 10);
  CHECK(s.test.size() == 20);
  for (std::size_t n = 3; n <= 300; ++n) {
    const auto sp = random_split(n, n);
    CHECK(sp.train.size() == n * 7 / 10);
    CHECK(sp.val.size() == n / 10);
    std::vector<std::size_t> all = sp.train;
    all.insert(all.end(), sp.val.begin(), sp.val.end());
    all.insert(all.end(), sp.test.begin(), sp.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < n; ++i) CHECK(all[i] == i);
  }
  const auto a = random_split(50, 9), b = random_split(50, 9);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(random_split(50, 10).train != a.train);
  CHECK_THROWS_AS(random_split(2, 0), ContractError);
}

TEST_CASE("sampler") {
  const auto w = sampler_weights({0, 0, 0, 1});
  CHECK(w.class_counts.at(0) == 3);
  CHECK(w.class_weights.at(1) == doctest::Approx(1.0));
  CHECK(w.example_weights[0] == doctest::Approx(1.0 / 3.0));
  double p1 = w.example_weights[3] / (3 * w.example_weights[0] + w.example_weights[3]);
  CHECK(p1 == doctest::Approx(0.5));

  std::vector<std::int32_t> classes(1000, 0);
  std::fill(classes.begin(), classes.begin() + 100, 1);
  const auto skew = sampler_weights(classes);
  Rng rng = make_rng(21);
  const auto draws = weighted_sample(skew, 10000, rng);
  std::size_t minority = 0;
  for (auto i : draws) minority += classes[i] == 1;
  const double frac = double(minority) / 10000.0;
  CHECK(frac > 0.48);
  CHECK(frac < 0.52);
  // Chi-square with one degree of freedom, alpha 0.01.
  const double e = 5000.0;
  const double chi2 = (minority - e) * (minority - e) / e + ((10000.0 - minority) - e) * ((10000.0 - minority) - e) / e;
  CHECK(chi2 < 6.635);

  const auto single = sampler_weights(std::vector<std::int32_t>(5, 1));
  for (auto i : weighted_sample(single, 100, rng)) CHECK(i < 5);
  Rng r1 = make_rng(3), r2 = make_rng(3);
  CHECK(train_order(skew, 0, r1) == train_order(skew, 0, r2));
  Rng r3 = make_rng(3);
  CHECK(train_order(skew, 0, r3).size() == 1000);
}

TEST_CASE("sampling class") {
  Example ml{"x", "t", std::vector<std::int32_t>(13, 0)};
  CHECK(sampling_class(ml, TaskKind::Multilabel13) == 0);
  ml.labels[4] = 1;
  CHECK(sampling_class(ml, TaskKind::Multilabel13) == 1);
  Example mc{"y", "t", {2}};
  CHECK(sampling_class(mc, TaskKind::Multiclass4) == 2);
}

TEST_CASE("batches") {
  const auto tok = Tokenizer::byte_level();
  Dataset ds = toy_dataset(20, 5);
  ds.examples[3].text = "";
  const auto enc = encode_examples(ds, natural_order(20), tok, 6);
  CHECK(enc[3].ids == std::vector<std::int32_t>{255});
  const auto batches = make_batches(enc, natural_order(20), 6, 8, tok.pad_id());
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].tokens.rows() == 8);
  CHECK(batches[2].tokens.rows() == 4);
  for (const auto& b : batches) {
    CHECK(b.tokens.cols() == 6);
    CHECK(b.labels.rows == b.tokens.rows());
    for (std::size_t r = 0; r < b.tokens.rows(); ++r) {
      CHECK(b.tokens.mask[r * 6] == 1);
      for (std::size_t t = 1; t < 6; ++t) CHECK(b.tokens.mask[r * 6 + t] <= b.tokens.mask[r * 6 + t - 1]);
    }
  }
  Dataset ml;
  ml.task = TaskKind::Multilabel13;
  for (int i = 0; i < 4; ++i) ml.examples.push_back({"m", "abc", std::vector<std::int32_t>(13, i % 2)});
  const auto mb = make_batches(encode_examples(ml, natural_order(4), tok, 8), natural_order(4), 8, 4, 255);
  CHECK(mb[0].labels.cols == 13);
  CHECK(mb[0].labels.values.size() == 4 * 13);
}

TEST_CASE("dataset loading") {
  const auto dir = scratch();
  write_file(dir / "plain.jsonl",
             "{\"note_id\": \"a\", \"text\": \"x\", \"label\": 1}\n{\"note_id\": \"b\", \"text\": \"y\", \"label\": 0}\n");
  auto ds = load_dataset(dir / "plain.jsonl", TaskKind::Binary);
  CHECK(ds.size() == 2);
  CHECK(ds.examples[0].labels == std::vector<std::int32_t>{1});

  write_file(dir / "labeled.jsonl",
             "{\"note_id\": \"a\", \"text\": \"x\", \"y_edema_3\": -1, \"label_any_disease_pos_or_unc\": 1}\n"
             "{\"note_id\": \"b\", \"text\": \"y\", \"y_edema_3\": null, \"label_any_disease_pos_or_unc\": 0}\n");
  ds = load_dataset(dir / "labeled.jsonl", TaskKind::Multiclass4, "y_edema_3");
  CHECK(ds.examples[0].labels[0] == 2);
  CHECK(ds.examples[1].labels[0] == 3);
  ds = load_dataset(dir / "labeled.jsonl", TaskKind::Binary, "label_any_disease_pos_or_unc");
  CHECK(ds.examples[0].labels[0] == 1);
  CHECK_THROWS(load_dataset(dir / "labeled.jsonl", TaskKind::Binary, "no_such_column"));

  write_file(dir / "bad.jsonl", "{\"note_id\": \"a\", \"text\": \"x\", \"label\": 2}\n{\"note_id\": \"b\", \"text\": \"y\", \"label\": 0}\n");
  CHECK_THROWS(load_dataset(dir / "bad.jsonl", TaskKind::Binary));
  std::filesystem::remove_all(dir);
}
