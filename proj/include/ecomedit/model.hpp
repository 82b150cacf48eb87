#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace ecomedit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using TokenId = std::int32_t;
using Tokens = std::vector<TokenId>;

// Byte-fallback word tokenizer. Ids 0..255 are raw bytes; ids from 256 on are
// whole-word pieces (optionally carrying one leading space). Any UTF-8 text
// round-trips exactly.
class Tokenizer {
public:
    Tokenizer() = default;
    explicit Tokenizer(std::vector<std::string> words);

    // Most frequent pieces of the corpus, ties broken lexicographically.
    static Tokenizer build(std::span<const std::string> corpus, std::size_t max_words);

    Tokens encode(std::string_view text) const;
    std::string decode(std::span<const TokenId> tokens) const;
    std::string piece(TokenId id) const;

    int vocab_size() const noexcept { return 256 + static_cast<int>(words_.size()); }
    const std::vector<std::string>& words() const noexcept { return words_; }

    // Byte span [begin, end) of every token of encode(text).
    std::vector<std::pair<std::size_t, std::size_t>> spans(std::string_view text) const;

    // Index of the token covering the last byte of the first occurrence of
    // `subject` inside `prompt`; throws AlignmentError when absent.
    std::size_t subject_last_token(std::string_view prompt, std::string_view subject) const;

    static std::vector<std::string_view> chunk(std::string_view text);

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, TokenId> index_;
};

// Replaces the MLP output of `layer` at token `position` with `value`.
struct Injection {
    int layer = 0;
    std::size_t position = 0;
    Vector value;
};

struct LayerTrace {
    Matrix keys;      // T x mlp_dim: input of the layer's down projection
    Matrix mlp_out;   // T x hidden_dim: output of the down projection
    Matrix residual;  // T x hidden_dim: residual stream after the layer
    Matrix logits;    // T x vocab
};

// Teacher-forced next-token loss over tokens[target_start:].
struct LossGradient {
    double loss = 0.0;       // mean negative log-likelihood of the target tokens
    Matrix d_mlp_out;        // T x hidden_dim: dloss / d(MLP output of the layer)
    Matrix keys;             // T x mlp_dim at the layer
};

struct ParameterChecksum {
    std::string name;
    std::uint64_t checksum = 0;
    bool operator==(const ParameterChecksum&) const = default;
};

// Causal language model surface used by the editing methods. Weight reads
// always return the current, possibly edited, values.
class LanguageModel {
public:
    virtual ~LanguageModel() = default;

    virtual const Tokenizer& tokenizer() const = 0;
    virtual int num_layers() const = 0;
    virtual int hidden_dim() const = 0;
    virtual int mlp_dim() const = 0;
    virtual int vocab_size() const = 0;
    virtual int max_positions() const = 0;

    // hidden_dim x mlp_dim.
    virtual const Matrix& down_proj(int layer) const = 0;
    virtual void set_down_proj(int layer, const Matrix& w) = 0;

    virtual Matrix logits(std::span<const TokenId> tokens) const = 0;
    virtual LayerTrace trace(std::span<const TokenId> tokens, int layer, const Injection* inj = nullptr) const = 0;
    virtual LossGradient loss_gradient(std::span<const TokenId> tokens, std::size_t target_start, int layer,
                                       const Injection* inj = nullptr) const = 0;

    virtual std::vector<ParameterChecksum> parameter_checksums() const = 0;
};

std::uint64_t weights_checksum(const LanguageModel& model);
std::uint64_t matrix_checksum(const Matrix& m);

struct ToyConfig {
    int hidden_dim = 64;
    int num_layers = 4;
    int num_heads = 4;
    int mlp_dim = 256;
    int max_positions = 256;
    std::uint64_t seed = 1234;
    double unembed_scale = 2.0;
    // Initialisation standard deviations, as multiples of 1/sqrt(fan_in)
    // except the two embeddings, which are absolute.
    double embed_scale = 1.0;
    double position_scale = 0.5;
    double qk_scale = 1.0;
    double ov_scale = 1.0;
    // Attention output projection of the last layer. A larger value lets the
    // final position read what earlier MLPs wrote at other positions.
    double readout_ov_scale = 20.0;
    double mlp_out_scale = 2.0;
};

struct ToyLayer {
    Vector ln1, ln2;
    Matrix wq, wk, wv, wo;  // d x d
    Matrix w_in;            // m x d
    Matrix w_out;           // d x m
};

struct TensorView {
    std::string name;
    double* data = nullptr;
    Eigen::Index size = 0;
};

// All trainable tensors of the toy model; also used for their gradients.
struct ToyParameters {
    Matrix tok_emb, pos_emb;  // V x d, S x d
    std::vector<ToyLayer> layers;
    Vector lnf;
    Matrix unembed;  // V x d

    ToyParameters zeros_like() const;
    // Checkpoint order.
    std::vector<TensorView> views();
};

struct FitConfig {
    int steps = 300;
    int batch = 16;
    double learning_rate = 3e-3;
    std::uint64_t seed = 1;
};

// Pre-norm decoder-only transformer: RMSNorm, causal multi-head attention,
// GELU MLP, no biases. Double precision throughout.
class ToyTransformer final : public LanguageModel {
public:
    using Layer = ToyLayer;

    ToyTransformer(Tokenizer tok, const ToyConfig& cfg);

    static ToyTransformer load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    const Tokenizer& tokenizer() const override { return tok_; }
    int num_layers() const override { return static_cast<int>(p_.layers.size()); }
    int hidden_dim() const override { return cfg_.hidden_dim; }
    int mlp_dim() const override { return cfg_.mlp_dim; }
    int vocab_size() const override { return tok_.vocab_size(); }
    int max_positions() const override { return cfg_.max_positions; }
    int num_heads() const { return cfg_.num_heads; }
    const ToyConfig& config() const { return cfg_; }

    const Matrix& down_proj(int layer) const override;
    void set_down_proj(int layer, const Matrix& w) override;

    Matrix logits(std::span<const TokenId> tokens) const override;
    LayerTrace trace(std::span<const TokenId> tokens, int layer, const Injection* inj = nullptr) const override;
    LossGradient loss_gradient(std::span<const TokenId> tokens, std::size_t target_start, int layer,
                               const Injection* inj = nullptr) const override;

    std::vector<ParameterChecksum> parameter_checksums() const override;

    const ToyParameters& parameters() const { return p_; }
    ToyParameters& mutable_parameters() { return p_; }

    // Mean next-token NLL over every position of `tokens`, with the gradient
    // of every parameter when `grad` is non-null.
    double lm_loss(std::span<const TokenId> tokens, ToyParameters* grad = nullptr) const;

    // Deterministic Adam training on the texts (truncated to max_positions).
    // Returns the mean batch loss of every step.
    std::vector<double> fit(std::span<const std::string> texts, const FitConfig& cfg);

private:
    ToyTransformer() = default;
    struct Cache;
    void check_tokens(std::span<const TokenId> tokens) const;
    Matrix run(std::span<const TokenId> tokens, const Injection* inj, Cache* cache, int capture_layer,
               LayerTrace* capture) const;
    // Backpropagates dlogits down to the output of `stop_layer` (-1: through
    // the embeddings) and returns the gradient of that residual stream.
    Matrix backward(std::span<const TokenId> tokens, const Cache& cache, const Matrix& dlogits, int stop_layer,
                    const Injection* inj, ToyParameters* grad) const;

    Tokenizer tok_;
    ToyConfig cfg_;
    ToyParameters p_;
};

}  // namespace ecomedit
