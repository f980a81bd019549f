#include "jtner/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "jtner/errors.hpp"

namespace jtner {

namespace {

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void i32(std::int32_t v) { bytes(&v, 4); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in_.gcount() != static_cast<std::streamsize>(n)) {
            throw IoError("corrupt checkpoint " + path_ + ": truncated file");
        }
    }
    std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
    std::int32_t i32() { std::int32_t v; bytes(&v, 4); return v; }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t n = u32();
        if (n > (1u << 20)) throw IoError("corrupt checkpoint " + path_ + ": unreasonable string length");
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

private:
    std::istream& in_;
    std::string path_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ostringstream buf(std::ios::binary);
    Writer w(buf);
    w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.u32(kCheckpointVersion);

    const EncoderConfig& e = ckpt.encoder;
    w.i32(e.vocab_size);
    w.i32(e.d_model);
    w.i32(e.n_heads);
    w.i32(e.n_layers);
    w.i32(e.d_ff);
    w.i32(e.max_len);
    w.u64(e.seed);

    const TrainConfig& t = ckpt.train;
    w.u8(static_cast<std::uint8_t>(t.mode));
    w.f64(t.lr);
    w.f64(t.intent_lr_factor);
    w.f64(t.intent_loss_weight);
    w.i32(t.epochs);
    w.i32(t.batch_size);
    w.u64(t.seed);
    w.u8(static_cast<std::uint8_t>(t.optimizer));
    w.f64(t.adam_beta1);
    w.f64(t.adam_beta2);
    w.f64(t.adam_eps);

    w.u32(static_cast<std::uint32_t>(ckpt.vocab.id_to_token.size()));
    for (const auto& tok : ckpt.vocab.id_to_token) w.str(tok);

    w.u32(static_cast<std::uint32_t>(ckpt.tags.size()));
    for (const auto& tag : ckpt.tags) w.str(tag);

    w.u64(ckpt.step_count);

    w.u32(static_cast<std::uint32_t>(ckpt.params.values.size()));
    for (const auto& [name, tensor] : ckpt.params.values) {  // std::map: canonical order
        w.str(name);
        w.u32(static_cast<std::uint32_t>(tensor.shape.size()));
        for (int d : tensor.shape) w.i32(d);
        for (double v : tensor.data) w.f64(v);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const std::string bytes = buf.str();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint file " + path);
    Reader r(in, path);

    char magic[sizeof(kCheckpointMagic)];
    r.bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw IoError("corrupt checkpoint " + path + ": bad magic");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw IoError("checkpoint " + path + " has format version " + std::to_string(version) + ", expected " +
                      std::to_string(kCheckpointVersion));
    }

    Checkpoint ckpt;
    EncoderConfig& e = ckpt.encoder;
    e.vocab_size = r.i32();
    e.d_model = r.i32();
    e.n_heads = r.i32();
    e.n_layers = r.i32();
    e.d_ff = r.i32();
    e.max_len = r.i32();
    e.seed = r.u64();

    TrainConfig& t = ckpt.train;
    const std::uint8_t mode = r.u8();
    if (mode > 2) throw IoError("corrupt checkpoint " + path + ": bad mode byte");
    t.mode = static_cast<TrainMode>(mode);
    t.lr = r.f64();
    t.intent_lr_factor = r.f64();
    t.intent_loss_weight = r.f64();
    t.epochs = r.i32();
    t.batch_size = r.i32();
    t.seed = r.u64();
    const std::uint8_t opt = r.u8();
    if (opt > 1) throw IoError("corrupt checkpoint " + path + ": bad optimizer byte");
    t.optimizer = static_cast<OptimizerKind>(opt);
    t.adam_beta1 = r.f64();
    t.adam_beta2 = r.f64();
    t.adam_eps = r.f64();

    const std::uint32_t vocab_n = r.u32();
    if (vocab_n < 2) throw IoError("corrupt checkpoint " + path + ": vocabulary lacks reserved entries");
    ckpt.vocab.id_to_token.reserve(vocab_n);
    for (std::uint32_t i = 0; i < vocab_n; ++i) {
        ckpt.vocab.id_to_token.push_back(r.str());
        ckpt.vocab.token_to_id.emplace(ckpt.vocab.id_to_token.back(), static_cast<int>(i));
    }

    const std::uint32_t tag_n = r.u32();
    for (std::uint32_t i = 0; i < tag_n; ++i) ckpt.tags.push_back(r.str());
    if (ckpt.tags != tag_names()) {
        throw IoError("corrupt checkpoint " + path + ": unexpected tag set");
    }

    ckpt.step_count = r.u64();

    const std::uint32_t param_n = r.u32();
    for (std::uint32_t i = 0; i < param_n; ++i) {
        const std::string name = r.str();
        const std::uint32_t ndim = r.u32();
        if (ndim > 4) throw IoError("corrupt checkpoint " + path + ": unreasonable tensor rank");
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(r.i32());
        const std::int64_t numel = shape_numel(shape);
        if (numel < 0 || numel > (1 << 28)) {
            throw IoError("corrupt checkpoint " + path + ": unreasonable tensor size");
        }
        std::vector<double> data(static_cast<std::size_t>(numel));
        for (double& v : data) v = r.f64();
        Tensor tensor(std::move(shape), std::move(data));
        tensor.requires_grad = true;
        if (!tensor.all_finite()) {
            throw IoError("corrupt checkpoint " + path + ": non-finite values in " + name);
        }
        ckpt.params.values[name] = std::move(tensor);
    }

    // Cross-check the parameter set against the stored config.
    e.validate();
    const ModelParams expected = init_params(e);
    if (expected.values.size() != ckpt.params.values.size()) {
        throw IoError("corrupt checkpoint " + path + ": parameter set does not match config");
    }
    for (const auto& [name, tensor] : expected.values) {
        auto it = ckpt.params.values.find(name);
        if (it == ckpt.params.values.end() || it->second.shape != tensor.shape) {
            throw IoError("corrupt checkpoint " + path + ": parameter " + name + " missing or misshaped");
        }
    }
    return ckpt;
}

}  // namespace jtner
