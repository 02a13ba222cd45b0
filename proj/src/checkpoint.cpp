#include "mbtsad/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mbtsad {

namespace {
constexpr char kMagic[8] = {'M', 'B', 'T', 'C', 'K', 'P', 'T', '1'};

nlohmann::json config_to_json(const ModelConfig& cfg) {
    return {{"num_layers", cfg.num_layers}, {"num_heads", cfg.num_heads},
            {"hidden_dim", cfg.hidden_dim}, {"max_len", cfg.max_len},
            {"vocab_size", cfg.vocab_size}, {"num_classes", cfg.num_classes},
            {"ffn_dim", cfg.ffn_dim},       {"dropout_rate", cfg.dropout_rate}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.num_layers = j.at("num_layers").get<int>();
    cfg.num_heads = j.at("num_heads").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.max_len = j.at("max_len").get<int>();
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.num_classes = j.at("num_classes").get<int>();
    cfg.ffn_dim = j.at("ffn_dim").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    return cfg;
}
}  // namespace

void save_checkpoint(const ModelParams& p, const std::string& path,
                     const nlohmann::json& manifest, uint64_t vocab_hash) {
    auto tensors = tensor_list(p);
    nlohmann::json header;
    header["config"] = config_to_json(p.cfg);
    header["manifest"] = manifest;
    header["vocab_hash"] = hex64(vocab_hash);
    nlohmann::json dir = nlohmann::json::array();
    for (const auto& [name, t] : tensors) dir.push_back({{"name", name}, {"size", t->size()}});
    header["tensors"] = dir;

    const std::string hs = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : tensors)
        out.write(reinterpret_cast<const char*>(t->data()),
                  static_cast<std::streamsize>(t->size() * sizeof(double)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json header = nlohmann::json::parse(hs);

    Checkpoint ck;
    ck.params = init_params(config_from_json(header.at("config")), 0);
    ck.manifest = header.value("manifest", nlohmann::json::object());
    ck.vocab_hash = std::stoull(header.at("vocab_hash").get<std::string>(), nullptr, 16);

    auto tensors = tensor_list(ck.params);
    const auto& dir = header.at("tensors");
    if (dir.size() != tensors.size())
        throw std::runtime_error("checkpoint tensor directory mismatch: " + path);
    for (size_t i = 0; i < tensors.size(); ++i) {
        if (dir[i].at("name").get<std::string>() != tensors[i].first ||
            dir[i].at("size").get<size_t>() != tensors[i].second->size())
            throw std::runtime_error("checkpoint tensor mismatch at " + tensors[i].first);
        in.read(reinterpret_cast<char*>(tensors[i].second->data()),
                static_cast<std::streamsize>(tensors[i].second->size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error("truncated checkpoint: " + path);
    return ck;
}

std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for hashing: " + path);
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
    return hex64(h);
}

}  // namespace mbtsad
