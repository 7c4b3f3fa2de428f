#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <future>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "gramufen/data/images.hpp"
#include "gramufen/data/manifest.hpp"
#include "gramufen/text_graph.hpp"

namespace gramufen {

/// An image is either a file decoded on demand or an already standardized
/// (3, H, W) tensor.
using ImageSource = std::variant<std::filesystem::path, std::shared_ptr<const Tensor<float>>>;

struct Example {
  std::string id;
  TokenSeq tokens;
  ImageSource image;
  Label label = Label::Real;
};

/// Tokenizes each sample and points its image at the first referenced file.
/// Samples whose text has no tokens are dropped and recorded.
inline std::vector<Example> prepare_examples(const std::vector<Sample>& samples, const Vocab& vocab,
                                             const std::filesystem::path& image_root,
                                             std::vector<DropRecord>* dropped = nullptr) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.image_refs.empty()) {
      if (dropped) dropped->push_back({s.id, "no-image"});
      continue;
    }
    try {
      out.push_back({s.id, tokenize(s.text, vocab), image_root / s.image_refs.front(), s.label});
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyText) throw;
      if (dropped) dropped->push_back({s.id, "empty-text"});
    }
  }
  return out;
}

struct BatchOptions {
  std::size_t batch_size = 32;
  std::size_t window_size = 2;
  bool shuffle = false;
  std::uint64_t seed = 0;
  std::size_t image_size = kImageSize;
  // Concurrent image decodes per batch; 0 decodes on the calling thread.
  std::size_t decode_workers = 0;
  // Text-only consumers skip decoding; batches then carry an empty image tensor.
  bool load_images = true;
};

template <class T>
struct Batch {
  std::vector<std::string> ids;
  BatchedGraph graph;
  Tensor<T> images;  // (B, 3, H, W)
  std::vector<Label> labels;

  std::size_t size() const { return ids.size(); }
};

/// Yields batches over a fixed example order. The last batch may be short.
/// Images are decoded only when their batch is requested; an example whose
/// image fails to decode is left out of its batch and recorded.
template <class T>
class BatchStream {
 public:
  BatchStream(std::shared_ptr<const std::vector<Example>> examples, BatchOptions options)
      : examples_(std::move(examples)), options_(options), order_(examples_->size()) {
    if (options_.batch_size < 1) throw Error(Errc::InvalidConfig, "batch_size must be at least 1");
    std::iota(order_.begin(), order_.end(), 0);
    if (options_.shuffle) {
      std::mt19937_64 rng(options_.seed);
      std::shuffle(order_.begin(), order_.end(), rng);
    }
  }

  std::size_t num_batches() const { return (order_.size() + options_.batch_size - 1) / options_.batch_size; }
  const std::vector<std::size_t>& order() const { return order_; }
  const std::vector<DropRecord>& dropped() const { return dropped_; }

  std::optional<Batch<T>> next() {
    while (cursor_ < order_.size()) {
      const std::size_t end = std::min(order_.size(), cursor_ + options_.batch_size);
      std::vector<std::size_t> members(order_.begin() + std::ptrdiff_t(cursor_), order_.begin() + std::ptrdiff_t(end));
      cursor_ = end;
      if (auto b = assemble(members)) return b;
    }
    return std::nullopt;
  }

 private:
  std::optional<Tensor<float>> decode(const Example& ex) const {
    if (const auto* t = std::get_if<std::shared_ptr<const Tensor<float>>>(&ex.image)) return **t;
    try {
      return load_image_file<float>(std::get<std::filesystem::path>(ex.image), options_.image_size);
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  std::optional<Batch<T>> assemble(const std::vector<std::size_t>& members) {
    const auto& ex = *examples_;
    std::vector<std::optional<Tensor<float>>> images(members.size());
    if (!options_.load_images) {
      for (auto& im : images) im.emplace();
    } else if (options_.decode_workers == 0) {
      for (std::size_t k = 0; k < members.size(); ++k) images[k] = decode(ex[members[k]]);
    } else {
      for (std::size_t start = 0; start < members.size(); start += options_.decode_workers) {
        const std::size_t stop = std::min(members.size(), start + options_.decode_workers);
        std::vector<std::future<std::optional<Tensor<float>>>> pending;
        for (std::size_t k = start; k < stop; ++k)
          pending.push_back(std::async(std::launch::async, [this, &ex, idx = members[k]] { return decode(ex[idx]); }));
        for (std::size_t k = start; k < stop; ++k) images[k] = pending[k - start].get();
      }
    }

    Batch<T> b;
    std::vector<SentenceGraph> graphs;
    std::vector<const Tensor<float>*> kept;
    for (std::size_t k = 0; k < members.size(); ++k) {
      const Example& e = ex[members[k]];
      if (!images[k]) {
        dropped_.push_back({e.id, "image-decode-failed"});
        continue;
      }
      b.ids.push_back(e.id);
      b.labels.push_back(e.label);
      graphs.push_back(sentence_to_graph(e.tokens, options_.window_size));
      kept.push_back(&*images[k]);
    }
    if (graphs.empty()) return std::nullopt;
    b.graph = batch_graphs(graphs);
    if (!options_.load_images) return b;
    const Shape& s0 = kept.front()->shape();
    Shape shape{kept.size()};
    shape.insert(shape.end(), s0.begin(), s0.end());
    b.images = Tensor<T>(shape);
    const std::size_t per = kept.front()->numel();
    for (std::size_t k = 0; k < kept.size(); ++k) {
      if (kept[k]->shape() != s0)
        throw Error(Errc::DimensionMismatch, "images in one batch differ in shape: " + shape_str(s0) + " vs " +
                                                 shape_str(kept[k]->shape()));
      for (std::size_t i = 0; i < per; ++i) b.images[k * per + i] = static_cast<T>((*kept[k])[i]);
    }
    return b;
  }

  std::shared_ptr<const std::vector<Example>> examples_;
  BatchOptions options_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::vector<DropRecord> dropped_;
};

template <class T>
BatchStream<T> make_batches(std::shared_ptr<const std::vector<Example>> examples, const BatchOptions& options) {
  return BatchStream<T>(std::move(examples), options);
}

/// Convenience form working straight from manifest samples.
template <class T>
BatchStream<T> make_batches(const std::vector<Sample>& samples, const Vocab& vocab,
                            const std::filesystem::path& image_root, const BatchOptions& options) {
  return BatchStream<T>(std::make_shared<const std::vector<Example>>(prepare_examples(samples, vocab, image_root)),
                        options);
}

}  // namespace gramufen
