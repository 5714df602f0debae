#include "edbench/checkpoint_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "edbench/errors.hpp"

namespace edbench {

namespace {

constexpr char kMagic[4] = {'T', 'L', 'M', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(std::string_view b, size_t off) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
    return v;
}

uint64_t get_u64(std::string_view b, size_t off) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
    return v;
}

void put_f32_block(std::string& out, const std::vector<float>& block) {
    if constexpr (std::endian::native == std::endian::little) {
        const size_t off = out.size();
        out.resize(off + block.size() * 4);
        std::memcpy(out.data() + off, block.data(), block.size() * 4);
    } else {
        for (float f : block) put_u32(out, std::bit_cast<uint32_t>(f));
    }
}

} // namespace

std::string checkpoint_to_bytes(const Checkpoint& ckpt) {
    jsonio::ojson header;
    header["config"] = ckpt.config.to_json();
    header["tokenizer"] = ckpt.tokenizer.to_json();
    header["provenance"] = ckpt.provenance;
    const std::string header_text = jsonio::dump(header);

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, header_text.size());
    out += header_text;
    visit_blocks(ckpt.params, ckpt.config,
                 [&out](const std::string& name, size_t, size_t, const std::vector<float>& b) {
                     for (float f : b) {
                         if (!std::isfinite(f)) {
                             throw ValidationError("non-finite parameter in block " + name);
                         }
                     }
                     put_f32_block(out, b);
                 });
    return out;
}

Checkpoint checkpoint_from_bytes(std::string_view bytes) {
    if (bytes.size() < 16) throw FormatError("checkpoint file truncated (header)");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError("checkpoint format error: bad magic");
    }
    const uint32_t version = get_u32(bytes, 4);
    if (version != kVersion) {
        throw FormatError("unsupported checkpoint format version " + std::to_string(version));
    }
    const uint64_t header_len = get_u64(bytes, 8);
    if (16 + header_len > bytes.size()) throw FormatError("checkpoint file truncated (header)");
    const auto header = jsonio::parse(bytes.substr(16, header_len));

    Checkpoint ckpt;
    try {
        ckpt.config = ModelConfig::from_json(header.at("config"));
        ckpt.tokenizer = Tokenizer::from_json(header.at("tokenizer"));
        ckpt.provenance = header.at("provenance").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad checkpoint header: ") + e.what());
    }
    if (ckpt.tokenizer.vocab_size() != ckpt.config.vocab_size) {
        throw FormatError("checkpoint header: tokenizer size does not match config");
    }

    ckpt.params.layers.resize(static_cast<size_t>(ckpt.config.n_layers));
    size_t off = 16 + header_len;
    visit_blocks(ckpt.params, ckpt.config,
                 [&](const std::string& name, size_t rows, size_t cols, std::vector<float>& b) {
                     const size_t n = rows * cols;
                     if (off + n * 4 > bytes.size()) {
                         throw FormatError("checkpoint file truncated in block " + name);
                     }
                     b.resize(n);
                     if constexpr (std::endian::native == std::endian::little) {
                         std::memcpy(b.data(), bytes.data() + off, n * 4);
                     } else {
                         for (size_t i = 0; i < n; ++i) {
                             b[i] = std::bit_cast<float>(get_u32(bytes, off + i * 4));
                         }
                     }
                     off += n * 4;
                     for (float f : b) {
                         if (!std::isfinite(f)) {
                             throw FormatError("non-finite parameter in block " + name);
                         }
                     }
                 });
    if (off != bytes.size()) throw FormatError("checkpoint file has trailing bytes");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const std::string bytes = checkpoint_to_bytes(ckpt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot open for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return checkpoint_from_bytes(bytes);
}

} // namespace edbench
