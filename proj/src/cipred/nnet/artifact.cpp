#include "cipred/nnet/artifact.hpp"

#include <cstdint>
#include <fstream>

#include <json.hpp>

namespace cipred::nnet {

using nlohmann::json;

namespace {

json arch_to_json(const ArchConfig& a) {
    return json{{"depthwise", a.depthwise},
                {"channels", a.channels},
                {"clin_features", a.clin_features},
                {"clin_dim", a.clin_dim},
                {"rank", a.rank},
                {"fused_dim", a.fused_dim}};
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig a;
    a.depthwise = j.at("depthwise").get<bool>();
    const auto ch = j.at("channels").get<std::vector<int>>();
    if (ch.size() != 5) throw FormatError("architecture channels must have 5 entries");
    std::copy(ch.begin(), ch.end(), a.channels.begin());
    a.clin_features = j.at("clin_features").get<int>();
    a.clin_dim = j.at("clin_dim").get<int>();
    a.rank = j.at("rank").get<int>();
    a.fused_dim = j.at("fused_dim").get<int>();
    return a;
}

json config_to_json(const TrainConfig& c) {
    return json{{"learning_rate", c.learning_rate},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"eps", c.eps},
                {"batch_size", c.batch_size},
                {"max_epochs", c.max_epochs},
                {"early_stop_patience", c.early_stop_patience},
                {"weight_decay", c.weight_decay},
                {"dropout_rate", c.dropout_rate},
                {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.eps = j.at("eps").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.early_stop_patience = j.at("early_stop_patience").get<int>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

json stats_to_json(const Standardizer::Stats& s) {
    return json{{"mean", s.mean}, {"sd", s.sd}};
}

Standardizer::Stats stats_from_json(const json& j) {
    Standardizer::Stats s;
    const auto m = j.at("mean").get<std::vector<double>>();
    const auto d = j.at("sd").get<std::vector<double>>();
    if (m.size() != 7 || d.size() != 7) throw FormatError("standardizer stats need 7 entries");
    std::copy(m.begin(), m.end(), s.mean.begin());
    std::copy(d.begin(), d.end(), s.sd.begin());
    return s;
}

json standardizer_to_json(const Standardizer& s) {
    json per = json::object();
    for (const auto& [c, st] : s.per_center) per[cohort::center_name(c)] = stats_to_json(st);
    return json{{"per_center", per}, {"pooled", stats_to_json(s.pooled)}, {"fitted", s.fitted}};
}

Standardizer standardizer_from_json(const json& j) {
    Standardizer s;
    for (const auto& [name, st] : j.at("per_center").items())
        s.per_center[cohort::center_from_name(name)] = stats_from_json(st);
    s.pooled = stats_from_json(j.at("pooled"));
    s.fitted = j.at("fitted").get<bool>();
    return s;
}

json history_to_json(const TrainHistory& h) {
    return json{{"train_loss", h.train_loss},
                {"val_loss", h.val_loss},
                {"val_accuracy", h.val_accuracy},
                {"best_epoch", h.best_epoch}};
}

TrainHistory history_from_json(const json& j) {
    TrainHistory h;
    h.train_loss = j.at("train_loss").get<std::vector<double>>();
    h.val_loss = j.at("val_loss").get<std::vector<double>>();
    h.val_accuracy = j.at("val_accuracy").get<std::vector<double>>();
    h.best_epoch = j.at("best_epoch").get<int>();
    return h;
}

json window_to_json(const preproc::SliceWindow& w) {
    std::string pos;
    switch (w.position) {
        case preproc::WindowPosition::superior: pos = "superior"; break;
        case preproc::WindowPosition::central: pos = "central"; break;
        case preproc::WindowPosition::inferior: pos = "inferior"; break;
        case preproc::WindowPosition::explicit_range: pos = "explicit"; break;
    }
    return json{{"position", pos}, {"count", w.count}, {"start", w.start}, {"end", w.end}};
}

preproc::SliceWindow window_from_json(const json& j) {
    preproc::SliceWindow w;
    const std::string pos = j.at("position").get<std::string>();
    if (pos == "superior") w.position = preproc::WindowPosition::superior;
    else if (pos == "central") w.position = preproc::WindowPosition::central;
    else if (pos == "inferior") w.position = preproc::WindowPosition::inferior;
    else if (pos == "explicit") w.position = preproc::WindowPosition::explicit_range;
    else throw FormatError("unknown window position " + pos);
    w.count = j.at("count").get<int>();
    w.start = j.at("start").get<int>();
    w.end = j.at("end").get<int>();
    return w;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw TruncationError("truncated artifact file: " + path);
    return v;
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw TruncationError("truncated artifact file: " + path);
    return v;
}

void write_container(const std::string& path, const json& header, const ParamSet& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write artifact file: " + path);
    out << "CIMA1\n";
    const std::string hdr = header.dump();
    write_u64(out, hdr.size());
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    write_u32(out, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& t : params.tensors) {
        write_u32(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) write_u32(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
    if (!out) throw IoError("write failed for artifact file: " + path);
}

std::pair<json, ParamSet> read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open artifact file: " + path);
    std::string magic;
    if (!std::getline(in, magic) || magic != "CIMA1")
        throw FormatError("bad artifact magic in " + path);
    const std::uint64_t hdr_len = read_u64(in, path);
    std::string hdr(hdr_len, '\0');
    in.read(hdr.data(), static_cast<std::streamsize>(hdr_len));
    if (!in) throw TruncationError("truncated artifact header: " + path);
    json header = json::parse(hdr, nullptr, false);
    if (header.is_discarded()) throw FormatError("invalid artifact header JSON: " + path);

    ParamSet params;
    const std::uint32_t n_tensors = read_u32(in, path);
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const std::uint32_t name_len = read_u32(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(in, path);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(read_u32(in, path));
        NamedTensor t;
        t.name = name;
        t.shape = shape;
        t.data.resize(shape_numel(shape));
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (!in) throw TruncationError("truncated tensor payload in " + path);
        params.tensors.push_back(std::move(t));
    }
    return {std::move(header), std::move(params)};
}

void validate_shapes(const ParamSet& loaded, const ParamSet& expected,
                     const std::string& path) {
    for (const auto& t : loaded.tensors) {
        const int i = expected.find(t.name);
        if (i < 0)
            throw FormatError("unexpected tensor '" + t.name + "' in " + path);
        if (expected.tensors[i].shape != t.shape)
            throw FormatError("shape mismatch for tensor '" + t.name + "' in " + path);
    }
    if (loaded.tensors.size() != expected.tensors.size())
        throw FormatError("artifact tensor count does not match architecture: " + path);
}

}  // namespace

void save_artifact(const ModelArtifact& artifact, const std::string& path) {
    json freeze = json::object();
    for (const auto& t : artifact.params.tensors) freeze[t.name] = t.frozen;
    const json header{{"kind", "model"},
                      {"arch", arch_to_json(artifact.arch)},
                      {"train_config", config_to_json(artifact.config)},
                      {"standardizer", standardizer_to_json(artifact.standardizer)},
                      {"window", window_to_json(artifact.window)},
                      {"target_mm", artifact.target_mm},
                      {"fingerprint", artifact.fingerprint().canonical()},
                      {"history", history_to_json(artifact.history)},
                      {"split_fingerprint", artifact.split_fingerprint},
                      {"freeze", freeze}};
    write_container(path, header, artifact.params);
}

ModelArtifact load_artifact(const std::string& path) {
    auto [header, params] = read_container(path);
    if (header.at("kind").get<std::string>() != "model")
        throw FormatError("not a model artifact: " + path);
    ModelArtifact art;
    art.arch = arch_from_json(header.at("arch"));
    art.config = config_from_json(header.at("train_config"));
    art.standardizer = standardizer_from_json(header.at("standardizer"));
    art.window = window_from_json(header.at("window"));
    art.target_mm = header.at("target_mm").get<double>();
    art.history = history_from_json(header.at("history"));
    art.split_fingerprint = header.at("split_fingerprint").get<std::string>();

    ParamSet expected = make_backbone_params(art.arch, 0);
    append_fusion_params(expected, art.arch, 0);
    validate_shapes(params, expected, path);

    const auto& freeze = header.at("freeze");
    for (auto& t : params.tensors) t.frozen = freeze.at(t.name).get<bool>();
    art.params = std::move(params);
    return art;
}

void save_backbone(const ParamSet& backbone, const ArchConfig& arch,
                   const TrainHistory& history, const std::string& path) {
    const json header{{"kind", "backbone"},
                      {"arch", arch_to_json(arch)},
                      {"history", history_to_json(history)}};
    write_container(path, header, backbone);
}

BackboneFile load_backbone(const std::string& path) {
    auto [header, params] = read_container(path);
    if (header.at("kind").get<std::string>() != "backbone")
        throw FormatError("not a backbone artifact: " + path);
    BackboneFile f;
    f.arch = arch_from_json(header.at("arch"));
    f.history = history_from_json(header.at("history"));
    f.backbone = std::move(params);
    validate_shapes(f.backbone, make_backbone_params(f.arch, 0), path);
    return f;
}

}  // namespace cipred::nnet
