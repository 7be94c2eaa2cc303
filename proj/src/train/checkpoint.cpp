#include "train/checkpoint.hpp"

#include "common/error.hpp"

#include <cstring>
#include <fstream>

namespace cfe::train {

namespace {

constexpr char kMagic[8] = {'C', 'F', 'E', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64_array(std::ostream& os, const double* d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &d[i], 8);
        put_u64(os, bits);
    }
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
        v = (v << 8) | b[i];
    return v;
}

void get_f64_array(std::istream& is, double* d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t bits = get_u64(is);
        std::memcpy(&d[i], &bits, 8);
    }
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw Error::io("cannot write checkpoint: " + path);
    f.write(kMagic, 8);
    put_u32(f, ckpt.version);
    put_u32(f, static_cast<std::uint32_t>(ckpt.kind.size()));
    f.write(ckpt.kind.data(), static_cast<std::streamsize>(ckpt.kind.size()));
    put_u64(f, ckpt.step);
    put_u64(f, ckpt.config_json.size());
    f.write(ckpt.config_json.data(), static_cast<std::streamsize>(ckpt.config_json.size()));
    put_u32(f, static_cast<std::uint32_t>(ckpt.entries.size()));
    for (const auto& e : ckpt.entries) {
        put_u32(f, static_cast<std::uint32_t>(e.name.size()));
        f.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        f.put(e.trainable ? 1 : 0);
        put_u32(f, static_cast<std::uint32_t>(e.shape.n));
        put_u32(f, static_cast<std::uint32_t>(e.shape.c));
        put_u32(f, static_cast<std::uint32_t>(e.shape.h));
        put_u32(f, static_cast<std::uint32_t>(e.shape.w));
        put_f64_array(f, e.data.data(), e.data.size());
        if (e.trainable)
            put_f64_array(f, e.momentum.data(), e.momentum.size());
    }
    if (!f)
        throw Error::io("cannot write checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error::io("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw Error::data("not a checkpoint file: " + path);
    Checkpoint c;
    c.version = get_u32(f);
    if (c.version != 1)
        throw Error::data("unsupported checkpoint version " + std::to_string(c.version) + ": " +
                          path);
    c.kind.resize(get_u32(f));
    f.read(c.kind.data(), static_cast<std::streamsize>(c.kind.size()));
    c.step = get_u64(f);
    c.config_json.resize(get_u64(f));
    f.read(c.config_json.data(), static_cast<std::streamsize>(c.config_json.size()));
    const std::uint32_t n_entries = get_u32(f);
    for (std::uint32_t i = 0; i < n_entries && f; ++i) {
        Checkpoint::Entry e;
        e.name.resize(get_u32(f));
        f.read(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        e.trainable = f.get() == 1;
        e.shape.n = static_cast<int>(get_u32(f));
        e.shape.c = static_cast<int>(get_u32(f));
        e.shape.h = static_cast<int>(get_u32(f));
        e.shape.w = static_cast<int>(get_u32(f));
        e.data.resize(e.shape.numel());
        get_f64_array(f, e.data.data(), e.data.size());
        if (e.trainable) {
            e.momentum.resize(e.data.size());
            get_f64_array(f, e.momentum.data(), e.momentum.size());
        }
        c.entries.push_back(std::move(e));
    }
    if (!f)
        throw Error::data("truncated checkpoint: " + path);
    return c;
}

Checkpoint snapshot_model(const std::string& kind, const nn::ParamStore& store,
                          std::uint64_t step, const std::string& config_json) {
    Checkpoint c;
    c.kind = kind;
    c.step = step;
    c.config_json = config_json;
    for (const nn::Parameter& p : store.params()) {
        Checkpoint::Entry e;
        e.name = p.name;
        e.shape = p.value.shape();
        e.trainable = true;
        e.data.assign(p.value.data(), p.value.data() + p.value.numel());
        e.momentum = p.momentum;
        c.entries.push_back(std::move(e));
    }
    for (const nn::NamedBuffer& b : store.buffers()) {
        Checkpoint::Entry e;
        e.name = b.name;
        e.shape = b.value.shape();
        e.trainable = false;
        e.data.assign(b.value.data(), b.value.data() + b.value.numel());
        c.entries.push_back(std::move(e));
    }
    return c;
}

void restore_model(nn::ParamStore& store, const Checkpoint& ckpt) {
    std::size_t restored = 0;
    for (const auto& e : ckpt.entries) {
        if (e.trainable) {
            nn::Parameter* p = store.find(e.name);
            if (!p)
                throw Error::data("checkpoint entry '" + e.name + "' not present in model");
            if (!(p->value.shape() == e.shape))
                throw Error::data("checkpoint entry '" + e.name + "' shape " + e.shape.str() +
                                  " does not match model shape " + p->value.shape().str());
            std::copy(e.data.begin(), e.data.end(), p->value.data());
            p->momentum = e.momentum;
        } else {
            nn::NamedBuffer* b = store.find_buffer(e.name);
            if (!b)
                throw Error::data("checkpoint buffer '" + e.name + "' not present in model");
            if (!(b->value.shape() == e.shape))
                throw Error::data("checkpoint buffer '" + e.name + "' shape mismatch");
            std::copy(e.data.begin(), e.data.end(), b->value.data());
        }
        ++restored;
    }
    if (restored != store.params().size() + store.buffers().size())
        throw Error::data("checkpoint does not cover every model parameter (" +
                          std::to_string(restored) + " restored)");
}

} // namespace cfe::train
