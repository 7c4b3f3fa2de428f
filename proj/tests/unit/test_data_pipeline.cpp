#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <opencv2/imgcodecs.hpp>

#include "gramufen/data/batching.hpp"
#include "gramufen/data/cleaning.hpp"
#include "support/corpora.hpp"

using namespace gramufen;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gramufen_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_png(const fs::path& p, cv::Scalar bgr, int rows = 20, int cols = 30) {
  cv::imwrite(p.string(), cv::Mat(rows, cols, CV_8UC3, bgr));
}

std::set<std::string> ids_of(const std::vector<Sample>& v) {
  std::set<std::string> s;
  for (const auto& x : v) s.insert(x.id);
  return s;
}

}  // namespace

TEST(Manifest, LoadsValidRows) {
  const auto dir = temp_dir("manifest_ok");
  write_png(dir / "a.png", {0, 0, 255});
  std::ofstream(dir / "m.tsv") << "id\ttext\timage_paths\tlabel\tevent_id\tsplit\n"
                               << "1\thello there\ta.png\tfake\tsandy\ttrain\n"
                               << "2\tline\\twith tab\ta.png|b.png\treal\t\tval\n"
                               << "3\tthird\ta.png\t1\t\ttest\n";
  const auto m = load_manifest(dir / "m.tsv");
  ASSERT_EQ(m.samples.size(), 3u);
  EXPECT_TRUE(m.dropped.empty());
  EXPECT_EQ(m.samples[0].event_id, "sandy");
  EXPECT_EQ(m.samples[1].text, "line\twith tab");
  EXPECT_EQ(m.samples[1].image_refs, (std::vector<std::string>{"a.png", "b.png"}));
  EXPECT_EQ(m.samples[2].label, Label::Fake);
  EXPECT_EQ(m.subset(Split::Val).size(), 1u);
  EXPECT_EQ(m.image_root, dir);
}

TEST(Manifest, DropsRowWithMissingImage) {
  const auto dir = temp_dir("manifest_missing");
  write_png(dir / "a.png", {0, 0, 255});
  std::ofstream(dir / "m.tsv") << "id\ttext\timage_paths\tlabel\n"
                               << "1\tone\ta.png\tfake\n"
                               << "2\ttwo\tgone.png|a.png\treal\n"
                               << "3\tthree\ta.png\treal\n";
  const auto m = load_manifest(dir / "m.tsv");
  EXPECT_EQ(m.samples.size(), 2u);
  ASSERT_EQ(m.dropped.size(), 1u);
  EXPECT_EQ(m.dropped[0].id, "2");
  EXPECT_EQ(m.dropped[0].reason, "missing-image");
}

TEST(Manifest, Errors) {
  const auto dir = temp_dir("manifest_err");
  write_png(dir / "a.png", {0, 0, 255});
  auto expect_code = [&](const std::string& body, Errc code, std::optional<fs::path> root = std::nullopt) {
    std::ofstream(dir / "m.tsv") << body;
    try {
      load_manifest(dir / "m.tsv", root);
      ADD_FAILURE() << "no error for:\n" << body;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << body;
    }
  };
  expect_code("id\ttext\timage_paths\tlabel\n1\ta\ta.png\tfake\n1\tb\ta.png\treal\n", Errc::ParseError);
  expect_code("id\ttext\timage_paths\tlabel\n1\ta\ta.png\tmaybe\n", Errc::ParseError);
  expect_code("id\ttext\tlabel\n1\ta\tfake\n", Errc::ParseError);
  expect_code("id\ttext\timage_paths\tlabel\n1\ta\ta.png\n", Errc::ParseError);
  expect_code("id\ttext\timage_paths\tlabel\n1\ta\ta.png\tfake\n", Errc::MissingImageRoot, dir / "nope");
}

TEST(Manifest, WriteThenLoadRoundTrips) {
  const auto dir = temp_dir("manifest_rt");
  write_png(dir / "a.png", {0, 0, 255});
  std::vector<Sample> in(2);
  in[0] = {"x", "tab\there\nnewline \\ slash", {"a.png"}, Label::Fake, "ev", Split::Val};
  in[1] = {"y", "plain", {"a.png", "b.png"}, Label::Real, std::nullopt, Split::Test};
  write_manifest(dir / "m.tsv", in);
  const auto m = load_manifest(dir / "m.tsv");
  ASSERT_EQ(m.samples.size(), 2u);
  EXPECT_EQ(m.samples[0].text, in[0].text);
  EXPECT_EQ(m.samples[0].split, Split::Val);
  EXPECT_EQ(m.samples[0].event_id, "ev");
  EXPECT_EQ(m.samples[1].image_refs, in[1].image_refs);
  EXPECT_FALSE(m.samples[1].event_id);
}

TEST(CleanText, Examples) {
  EXPECT_EQ(clean_text("RT @a: Hello http://x.co world"), "hello world");
  EXPECT_EQ(clean_text("plain text"), "plain text");
  EXPECT_EQ(clean_text("@a @b"), "");
  EXPECT_EQ(clean_text("rt @user: breaking news"), "breaking news");
  EXPECT_EQ(clean_text("art is not a retweet"), "art is not a retweet");
  EXPECT_EQ(clean_text("start RT in the middle"), "start rt in the middle");
  EXPECT_EQ(clean_text("   lots    of   spaces   "), "lots of spaces");
  EXPECT_EQ(clean_text("www.example.com is down"), "is down");
  EXPECT_EQ(clean_text("#hashtag stays #Sandy"), "#hashtag stays #sandy");
}

TEST(CleanText, IdempotentOnCorpus) {
  const auto& corpus = testing_support::cleaning_corpus();
  ASSERT_GE(corpus.size(), 50u);
  for (const auto& raw : corpus) {
    const auto once = clean_text(raw);
    EXPECT_EQ(clean_text(once), once) << "input: " << raw;
    EXPECT_EQ(once.find("http"), std::string::npos) << raw;
    EXPECT_EQ(once.find("  "), std::string::npos) << raw;
    for (char c : once) EXPECT_FALSE(std::isupper(static_cast<unsigned char>(c))) << raw;
  }
}

TEST(CleanSamples, DropsEmptyResults) {
  std::vector<Sample> in(2);
  in[0] = {"a", "@x @y", {"i"}, Label::Fake, {}, Split::Train};
  in[1] = {"b", "RT @x: ok", {"i"}, Label::Real, {}, Split::Train};
  std::vector<DropRecord> dropped;
  const auto out = clean_samples(in, &dropped);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].text, "ok");
  ASSERT_EQ(dropped.size(), 1u);
  EXPECT_EQ(dropped[0].reason, "empty-after-cleaning");
}

TEST(Deduplicate, CraftedCorpus) {
  const auto cleaned = clean_samples(testing_support::dedup_corpus());
  ASSERT_EQ(cleaned.size(), 10u);
  const auto out = deduplicate(cleaned);
  EXPECT_EQ(out.size(), 7u);
  EXPECT_EQ(ids_of(out), (std::set<std::string>{"d0", "d2", "d3", "d5", "d7", "d8", "d9"}));
  const auto again = deduplicate(out);
  ASSERT_EQ(again.size(), out.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(again[i].id, out[i].id);
}

TEST(Deduplicate, KeyIncludesLabelAndKeepsOrder) {
  std::vector<Sample> in(4);
  in[0] = {"a", "same", {"i"}, Label::Fake, {}, Split::Train};
  in[1] = {"b", "same", {"i"}, Label::Real, {}, Split::Train};
  in[2] = {"c", "same", {"i"}, Label::Fake, {}, Split::Train};
  in[3] = {"d", "other", {"i"}, Label::Fake, {}, Split::Train};
  const auto out = deduplicate(in);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].id, "a");
  EXPECT_EQ(out[1].id, "b");
  EXPECT_EQ(out[2].id, "d");
}

TEST(Split, SizesAndDeterminism) {
  const auto ten = testing_support::numbered_samples(10);
  const auto [tr, va] = split_train_val(ten, 0.2, 7);
  EXPECT_EQ(tr.size(), 8u);
  EXPECT_EQ(va.size(), 2u);
  const auto [tr2, va2] = split_train_val(ten, 0.2, 7);
  EXPECT_EQ(ids_of(va), ids_of(va2));
  EXPECT_EQ(ids_of(tr), ids_of(tr2));
  const auto [tr5, va5] = split_train_val(testing_support::numbered_samples(5), 0.2, 1);
  EXPECT_EQ(tr5.size(), 4u);
  EXPECT_EQ(va5.size(), 1u);
}

TEST(Split, DisjointCover) {
  for (std::size_t n : {2, 3, 7, 10, 31})
    for (double f : {0.1, 0.2, 0.5, 0.9})
      for (std::uint64_t seed : {0, 1, 2}) {
        const auto all = testing_support::numbered_samples(n);
        const auto [tr, va] = split_train_val(all, f, seed);
        EXPECT_GE(tr.size(), 1u);
        EXPECT_GE(va.size(), 1u);
        auto a = ids_of(tr), b = ids_of(va);
        for (const auto& id : b) EXPECT_FALSE(a.count(id));
        a.insert(b.begin(), b.end());
        EXPECT_EQ(a, ids_of(all));
        EXPECT_LE(std::abs(double(va.size()) - f * double(n)), 1.0);
      }
}

TEST(Split, Errors) {
  try {
    split_train_val(testing_support::numbered_samples(1), 0.2, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewSamples);
  }
  EXPECT_THROW(split_train_val(testing_support::numbered_samples(5), 0.0, 0), Error);
  EXPECT_THROW(split_train_val(testing_support::numbered_samples(5), 1.0, 0), Error);
}

TEST(Images, ShapeAndStandardization) {
  const auto dir = temp_dir("images");
  write_png(dir / "red.png", {0, 0, 255});
  const auto t = load_image_file<double>(dir / "red.png", 32);
  EXPECT_EQ(t.shape(), (Shape{3, 32, 32}));
  EXPECT_NEAR(t[0], (1.0 - 0.485) / 0.229, 1e-6);                // R plane
  EXPECT_NEAR(t[32 * 32], (0.0 - 0.456) / 0.224, 1e-6);          // G plane
  EXPECT_NEAR(t[2 * 32 * 32 + 5], (0.0 - 0.406) / 0.225, 1e-6);  // B plane
  cv::imwrite((dir / "x.jpg").string(), cv::Mat(50, 40, CV_8UC3, cv::Scalar(10, 20, 30)));
  EXPECT_EQ(load_image_file<float>(dir / "x.jpg").shape(), (Shape{3, 224, 224}));
}

TEST(Images, GrayscaleReplicated) {
  const auto dir = temp_dir("gray");
  cv::imwrite((dir / "g.png").string(), cv::Mat(10, 10, CV_8UC1, cv::Scalar(128)));
  const auto t = load_image_file<double>(dir / "g.png", 10);
  const double v = 128.0 / 255.0;
  for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(t[c * 100 + 17], (v - kImageMean[c]) / kImageStd[c], 1e-6);
}

TEST(Images, DecodeError) {
  const auto dir = temp_dir("bad_image");
  std::ofstream(dir / "bad.jpg") << "not an image";
  try {
    load_image_file<float>(dir / "bad.jpg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DecodeError);
  }
}

TEST(Batches, PartitionOrderAndAlignment) {
  const auto dir = temp_dir("batches");
  std::vector<Sample> samples = testing_support::numbered_samples(10);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    write_png(dir / ("img" + std::to_string(i) + ".png"), {double(i * 20), 0, 0}, 8, 8);
    samples[i].image_refs = {"img" + std::to_string(i) + ".png", "missing.png"};
  }
  const auto vocab = build_vocab({"sample number 0 1 2 3 4 5 6 7 8 9"});
  BatchOptions opt;
  opt.batch_size = 4;
  opt.image_size = 8;
  auto stream = make_batches<double>(samples, vocab, dir, opt);
  std::vector<std::size_t> sizes;
  std::vector<std::string> order;
  while (auto b = stream.next()) {
    sizes.push_back(b->size());
    EXPECT_EQ(b->graph.graph_count, b->size());
    EXPECT_EQ(b->images.size(0), b->size());
    EXPECT_EQ(b->labels.size(), b->size());
    for (std::size_t k = 0; k < b->size(); ++k) {
      order.push_back(b->ids[k]);
      const std::size_t i = std::stoul(b->ids[k].substr(1));
      EXPECT_EQ(b->labels[k], samples[i].label);
      // Blue channel encodes the sample index, so image k belongs to sample i.
      const double blue = (double(i * 20) / 255.0 - kImageMean[2]) / kImageStd[2];
      EXPECT_NEAR(b->images[((k * 3 + 2) * 8) * 8], blue, 1e-6);
    }
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 2}));
  std::vector<std::string> expected;
  for (const auto& s : samples) expected.push_back(s.id);
  EXPECT_EQ(order, expected);
}

TEST(Batches, ShuffleIsSeededAndDecodeFailuresDrop) {
  const auto dir = temp_dir("shuffle");
  write_png(dir / "ok.png", {1, 2, 3}, 8, 8);
  std::ofstream(dir / "bad.png") << "corrupt";
  auto samples = testing_support::numbered_samples(12);
  for (auto& s : samples) s.image_refs = {"ok.png"};
  samples[3].image_refs = {"bad.png"};
  const auto vocab = build_vocab({"sample number"});
  const auto examples = std::make_shared<const std::vector<Example>>(prepare_examples(samples, vocab, dir));
  BatchOptions opt;
  opt.batch_size = 5;
  opt.image_size = 8;
  opt.shuffle = true;
  opt.seed = 3;
  auto a = make_batches<float>(examples, opt), b = make_batches<float>(examples, opt);
  EXPECT_EQ(a.order(), b.order());
  opt.decode_workers = 3;
  auto c = make_batches<float>(examples, opt);
  std::size_t total = 0;
  std::vector<std::string> seq_a, seq_c;
  while (auto x = a.next()) {
    total += x->size();
    seq_a.insert(seq_a.end(), x->ids.begin(), x->ids.end());
  }
  while (auto x = c.next()) seq_c.insert(seq_c.end(), x->ids.begin(), x->ids.end());
  EXPECT_EQ(total, 11u);
  EXPECT_EQ(seq_a, seq_c);
  ASSERT_EQ(a.dropped().size(), 1u);
  EXPECT_EQ(a.dropped()[0].id, "n3");
  EXPECT_EQ(a.dropped()[0].reason, "image-decode-failed");
}

TEST(Batches, RejectsZeroBatchSize) {
  BatchOptions opt;
  opt.batch_size = 0;
  EXPECT_THROW(make_batches<float>(std::make_shared<const std::vector<Example>>(), opt), Error);
}

TEST(PrepareExamples, UsesFirstImageAndDropsEmptyText) {
  std::vector<Sample> in(2);
  in[0] = {"a", "hello", {"first.png", "second.png"}, Label::Fake, {}, Split::Train};
  in[1] = {"b", "   ", {"first.png"}, Label::Real, {}, Split::Train};
  std::vector<DropRecord> dropped;
  const auto ex = prepare_examples(in, build_vocab({"hello"}), "/root", &dropped);
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_EQ(std::get<fs::path>(ex[0].image), fs::path("/root/first.png"));
  ASSERT_EQ(dropped.size(), 1u);
  EXPECT_EQ(dropped[0].reason, "empty-text");
}
