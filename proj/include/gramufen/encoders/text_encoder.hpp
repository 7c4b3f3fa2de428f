#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "gramufen/encoders/config.hpp"
#include "gramufen/encoders/lstm.hpp"
#include "gramufen/encoders/sage.hpp"
#include "gramufen/text_graph.hpp"

namespace gramufen {

/// Embedding -> LSTM over each sentence -> SAGE stack over the sentence graph
/// -> global mean pool -> dropout. The projection head lives outside so the
/// pooled features can also feed the text-only pretraining classifier.
template <class T>
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const TextEncoderConfig& config, std::mt19937_64& rng) : config_(config) {
    config_.validate();
    auto table = normal_tensor<T>({config_.vocab_size, config_.embed_dim}, 1.0, rng);
    for (std::size_t c = 0; c < config_.embed_dim; ++c) table(Vocab::kPad, c) = T{0};
    embedding_ = make_param<T>("embedding", std::move(table), !config_.embed_frozen, false);
    lstm_ = Lstm<T>(config_.embed_dim, config_.lstm_hidden_dim, config_.lstm_layers, config_.lstm_dropout, rng);
    for (std::size_t l = 0; l < config_.sage_layers; ++l) {
      const std::size_t in = l == 0 ? config_.lstm_hidden_dim : config_.sage_hidden_dim;
      sage_.emplace_back(in, config_.sage_hidden_dim, config_.sage_l2_normalize, rng);
    }
  }

  const TextEncoderConfig& config() const { return config_; }
  std::size_t output_dim() const { return config_.sage_hidden_dim; }

  /// Replaces the embedding table (e.g. with pretrained vectors). The PAD row
  /// is forced to zero.
  void set_embedding_table(Tensor<T> table) {
    require_shape(table, embedding_.var.shape(), "embedding table");
    for (std::size_t c = 0; c < config_.embed_dim; ++c) table(Vocab::kPad, c) = T{0};
    embedding_.var.mutable_value() = std::move(table);
  }

  Var<T> embed_tokens(const BatchedGraph& graph) const {
    return ops::embedding_lookup(embedding_.var, std::span<const std::int64_t>(graph.node_token_ids), Vocab::kPad);
  }

  Var<T> lstm_node_features(const Var<T>& embedded, const BatchedGraph& graph, bool training,
                            std::mt19937_64& rng) const {
    return lstm_(embedded, graph.graph_offsets, training, rng);
  }

  /// Runs the SAGE stack. ReLU follows every layer except the last, unless
  /// the config asks for it there too.
  Var<T> graph_features(Var<T> h, const BatchedGraph& graph) const {
    const auto adjacency = incoming_adjacency(graph.num_nodes(), graph.edges);
    for (std::size_t l = 0; l < sage_.size(); ++l) {
      h = sage_[l](h, adjacency);
      if (l + 1 < sage_.size() || config_.sage_relu_after_last) h = ops::relu(h);
    }
    return h;
  }

  /// Pooled (B x sage_hidden_dim) features, dropout applied when training.
  Var<T> operator()(const BatchedGraph& graph, bool training, std::mt19937_64& rng) const {
    auto x = ops::dropout(embed_tokens(graph), config_.embed_dropout, training, rng);
    x = lstm_node_features(x, graph, training, rng);
    x = graph_features(x, graph);
    x = global_mean_pool(x, std::span<const std::size_t>(graph.batch_vector), graph.graph_count);
    return ops::dropout(x, config_.dropout_rate, training, rng);
  }

  Parameter<T>& embedding() { return embedding_; }
  std::vector<SageLayer<T>>& sage_layers() { return sage_; }

  void collect(ParamList<T>& out, const std::string& prefix) {
    embedding_.name = prefix + "embedding";
    out.push_back(&embedding_);
    lstm_.collect(out, prefix + "lstm.");
    for (std::size_t l = 0; l < sage_.size(); ++l) sage_[l].collect(out, prefix + "sage" + std::to_string(l) + ".");
  }

 private:
  TextEncoderConfig config_;
  Parameter<T> embedding_;
  Lstm<T> lstm_;
  std::vector<SageLayer<T>> sage_;
};

}  // namespace gramufen
