#include "pcv/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "pcv/rng.hpp"

namespace pcv {

namespace {

// internal T-Net sizes (3 -> 32 -> 64 -> maxpool -> 32 -> 9)
const std::vector<int> kTnetMlp = {32, 64};
const std::vector<int> kTnetHead = {32};

Tensor uniform_fan_in(Rng& rng, int fan_in, int fan_out) {
    const double bound = std::sqrt(1.0 / fan_in);
    Tensor w = Tensor::zeros({fan_in, fan_out});
    for (float& v : w.data) v = static_cast<float>(rng.uniform(-bound, bound));
    return w;
}

// batch as (b, n) with data viewed as (b*n) x 3
std::pair<int, int> batch_dims(const ModelConfig& cfg, const Tensor& batch) {
    if (batch.rank() == 2) {
        if (batch.shape[1] != 3)
            throw std::invalid_argument("forward: expected n x 3 cloud, got " + batch.shape_str());
        if (batch.shape[0] != cfg.num_points)
            throw std::invalid_argument("forward: cloud has " + std::to_string(batch.shape[0]) +
                                        " points, model expects " + std::to_string(cfg.num_points));
        return {1, batch.shape[0]};
    }
    if (batch.rank() == 3) {
        if (batch.shape[2] != 3)
            throw std::invalid_argument("forward: expected b x n x 3 batch, got " + batch.shape_str());
        if (batch.shape[1] != cfg.num_points)
            throw std::invalid_argument("forward: batch has " + std::to_string(batch.shape[1]) +
                                        " points, model expects " + std::to_string(cfg.num_points));
        return {batch.shape[0], batch.shape[1]};
    }
    throw std::invalid_argument("forward: batch must be 2D or 3D, got " + batch.shape_str());
}

}  // namespace

void ModelConfig::validate() const {
    if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
    if (num_points < 1) throw std::invalid_argument("num_points must be >= 1");
    if (point_mlp_widths.empty()) throw std::invalid_argument("point_mlp_widths must be non-empty");
    for (int w : point_mlp_widths)
        if (w < 1) throw std::invalid_argument("point mlp width must be >= 1");
    for (int w : head_widths)
        if (w < 1) throw std::invalid_argument("head width must be >= 1");
}

Tensor& ModelParams::find(const std::string& name) {
    for (auto& [n, t] : tensors)
        if (n == name) return t;
    throw std::out_of_range("model has no tensor named " + name);
}

const Tensor& ModelParams::find(const std::string& name) const {
    return const_cast<ModelParams*>(this)->find(name);
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    ModelParams p;
    p.config = config;
    auto add_affine = [&](const std::string& prefix, int fan_in, int fan_out) {
        p.tensors.emplace_back(prefix + ".weight", uniform_fan_in(rng, fan_in, fan_out));
        p.tensors.emplace_back(prefix + ".bias", Tensor::zeros({fan_out}));
    };
    if (config.with_input_tnet) {
        int in = 3;
        for (size_t i = 0; i < kTnetMlp.size(); ++i) {
            add_affine("tnet.mlp." + std::to_string(i), in, kTnetMlp[i]);
            in = kTnetMlp[i];
        }
        for (size_t i = 0; i < kTnetHead.size(); ++i) {
            add_affine("tnet.head." + std::to_string(i), in, kTnetHead[i]);
            in = kTnetHead[i];
        }
        // zero weights + identity bias: the transform starts as the 3x3 identity
        p.tensors.emplace_back("tnet.out.weight", Tensor::zeros({in, 9}));
        p.tensors.emplace_back("tnet.out.bias",
                               Tensor({9}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    }
    int in = 3;
    for (size_t i = 0; i < config.point_mlp_widths.size(); ++i) {
        add_affine("mlp." + std::to_string(i), in, config.point_mlp_widths[i]);
        in = config.point_mlp_widths[i];
    }
    for (size_t i = 0; i < config.head_widths.size(); ++i) {
        add_affine("head." + std::to_string(i), in, config.head_widths[i]);
        in = config.head_widths[i];
    }
    add_affine("out", in, config.num_classes);
    p.tensors.emplace_back("config.num_points", Tensor::scalar(static_cast<float>(config.num_points)));
    return p;
}

TapeForward forward_tape(const ModelParams& params, Tape& tape, const Tensor& batch,
                         std::vector<int>* param_nodes) {
    const auto [b, n] = batch_dims(params.config, batch);
    std::vector<int> ids;
    ids.reserve(params.tensors.size());
    for (const auto& [name, t] : params.tensors) ids.push_back(tape.leaf(t));
    if (param_nodes) *param_nodes = ids;
    auto pid = [&](const std::string& name) {
        for (size_t i = 0; i < params.tensors.size(); ++i)
            if (params.tensors[i].first == name) return ids[i];
        throw std::out_of_range("model has no tensor named " + name);
    };

    Tensor flat({b * n, 3}, batch.data);
    TapeForward r;
    r.input = tape.leaf(std::move(flat));
    int cur = r.input;

    if (params.config.with_input_tnet) {
        int t = cur;
        for (size_t i = 0; i < kTnetMlp.size(); ++i) {
            const std::string pre = "tnet.mlp." + std::to_string(i);
            t = tape.relu(tape.add_bias(tape.matmul(t, pid(pre + ".weight")), pid(pre + ".bias")));
        }
        t = tape.reduce_max_points(t, b, n);
        for (size_t i = 0; i < kTnetHead.size(); ++i) {
            const std::string pre = "tnet.head." + std::to_string(i);
            t = tape.relu(tape.add_bias(tape.matmul(t, pid(pre + ".weight")), pid(pre + ".bias")));
        }
        const int mats = tape.add_bias(tape.matmul(t, pid("tnet.out.weight")), pid("tnet.out.bias"));
        cur = tape.bmm_points(cur, mats, b, n);
    }

    for (size_t i = 0; i < params.config.point_mlp_widths.size(); ++i) {
        const std::string pre = "mlp." + std::to_string(i);
        cur = tape.relu(tape.add_bias(tape.matmul(cur, pid(pre + ".weight")), pid(pre + ".bias")));
    }
    cur = tape.reduce_max_points(cur, b, n);
    for (size_t i = 0; i < params.config.head_widths.size(); ++i) {
        const std::string pre = "head." + std::to_string(i);
        cur = tape.relu(tape.add_bias(tape.matmul(cur, pid(pre + ".weight")), pid(pre + ".bias")));
    }
    cur = tape.add_bias(tape.matmul(cur, pid("out.weight")), pid("out.bias"));
    r.logits = tape.log_softmax(cur);
    return r;
}

Tensor forward(const ModelParams& params, const Tensor& batch) {
    const auto [b, n] = batch_dims(params.config, batch);
    Tensor cur({b * n, 3}, batch.data);

    if (params.config.with_input_tnet) {
        Tensor t = cur;
        for (size_t i = 0; i < kTnetMlp.size(); ++i) {
            const std::string pre = "tnet.mlp." + std::to_string(i);
            t = relu(add_bias(matmul(t, params.find(pre + ".weight")), params.find(pre + ".bias")));
        }
        t = reduce_max_points(t, b, n);
        for (size_t i = 0; i < kTnetHead.size(); ++i) {
            const std::string pre = "tnet.head." + std::to_string(i);
            t = relu(add_bias(matmul(t, params.find(pre + ".weight")), params.find(pre + ".bias")));
        }
        const Tensor mats = add_bias(matmul(t, params.find("tnet.out.weight")), params.find("tnet.out.bias"));
        cur = bmm_points(cur, mats, b, n);
    }

    for (size_t i = 0; i < params.config.point_mlp_widths.size(); ++i) {
        const std::string pre = "mlp." + std::to_string(i);
        cur = relu(add_bias(matmul(cur, params.find(pre + ".weight")), params.find(pre + ".bias")));
    }
    cur = reduce_max_points(cur, b, n);
    for (size_t i = 0; i < params.config.head_widths.size(); ++i) {
        const std::string pre = "head." + std::to_string(i);
        cur = relu(add_bias(matmul(cur, params.find(pre + ".weight")), params.find(pre + ".bias")));
    }
    cur = add_bias(matmul(cur, params.find("out.weight")), params.find("out.bias"));
    return log_softmax(cur);
}

std::vector<int> predict(const ModelParams& params, const Tensor& batch) {
    const Tensor logits = forward(params, batch);
    std::vector<int> out(logits.rows());
    for (int i = 0; i < logits.rows(); ++i) out[i] = argmax_row(logits, i);
    return out;
}

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    os.write(b, 2);
}
void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}
std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}
std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0] | (b[1] << 8) | (b[2] << 16) |
                                      (static_cast<std::uint32_t>(b[3]) << 24));
}

[[noreturn]] void format_error(const std::string& what) {
    throw std::runtime_error("PCVM format error: " + what);
}

}  // namespace

void save_model(const ModelParams& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write("PCVM", 4);
    put_u32(os, 1);
    put_u32(os, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& [name, t] : params.tensors) {
        put_u16(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        os.put(static_cast<char>(t.rank()));
        for (int e : t.shape) put_u32(os, static_cast<std::uint32_t>(e));
        static_assert(sizeof(float) == 4);
        os.write(reinterpret_cast<const char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * 4));
    }
    if (!os) throw std::runtime_error("write failed for " + path);
}

ModelParams load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PCVM", 4) != 0) format_error("bad magic in " + path);
    const std::uint32_t version = get_u32(is);
    if (version != 1) format_error("unsupported version " + std::to_string(version));
    const std::uint32_t count = get_u32(is);
    if (!is) format_error("truncated header in " + path);

    ModelParams p;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = get_u16(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) format_error("truncated tensor name at index " + std::to_string(i));
        const int rank = is.get();
        if (rank < 1 || rank > 8) format_error("bad rank for tensor " + name);
        std::vector<int> shape(rank);
        for (int d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(get_u32(is));
            if (shape[d] < 1) format_error("bad extent for tensor " + name);
        }
        const std::int64_t n = shape_numel(shape);
        std::vector<float> data(static_cast<size_t>(n));
        is.read(reinterpret_cast<char*>(data.data()), n * 4);
        if (!is) format_error("truncated data for tensor " + name);
        p.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }

    // reconstruct config from tensor names, then cross-check shapes
    ModelConfig cfg;
    cfg.point_mlp_widths.clear();
    cfg.head_widths.clear();
    for (const auto& [name, t] : p.tensors) {
        if (name.rfind("mlp.", 0) == 0 && name.ends_with(".bias"))
            cfg.point_mlp_widths.push_back(t.shape[0]);
        else if (name.rfind("head.", 0) == 0 && name.ends_with(".bias"))
            cfg.head_widths.push_back(t.shape[0]);
        else if (name == "out.bias")
            cfg.num_classes = t.shape[0];
        else if (name == "tnet.out.bias")
            cfg.with_input_tnet = true;
        else if (name == "config.num_points")
            cfg.num_points = static_cast<int>(t.data[0]);
    }
    p.config = cfg;
    cfg.validate();

    int in = 3;
    auto check_affine = [&](const std::string& prefix, int fan_out) {
        const Tensor& w = p.find(prefix + ".weight");
        if (w.rank() != 2 || w.shape[0] != in || w.shape[1] != fan_out)
            format_error("tensor " + prefix + ".weight has shape " + w.shape_str() +
                         ", expected [" + std::to_string(in) + "x" + std::to_string(fan_out) + "]");
        in = fan_out;
    };
    for (size_t i = 0; i < cfg.point_mlp_widths.size(); ++i)
        check_affine("mlp." + std::to_string(i), cfg.point_mlp_widths[i]);
    for (size_t i = 0; i < cfg.head_widths.size(); ++i)
        check_affine("head." + std::to_string(i), cfg.head_widths[i]);
    check_affine("out", cfg.num_classes);
    return p;
}

}  // namespace pcv
