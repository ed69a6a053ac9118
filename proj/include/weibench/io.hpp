// SPDX-License-Identifier: Apache-2.0
//
// Persistence: JSON for the control plane (scene, manifest, checkpoints
// headers, reports), raw little-endian blobs for bulk arrays.

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "weibench/dataset.hpp"

namespace weibench {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr int kDatasetFormatVersion = 1;
constexpr int kCheckpointFormatVersion = 1;

// ---------------------------------------------------------------------------
// Scene JSON

inline json scene_to_json(const Scene& s) {
    json j;
    j["ground_z"] = s.ground_z;
    j["extent"] = {{"min_x", s.extent.min_x},
                   {"min_y", s.extent.min_y},
                   {"max_x", s.extent.max_x},
                   {"max_y", s.extent.max_y}};
    j["tx"] = {s.tx.x, s.tx.y, s.tx.z};
    j["carrier_freq_hz"] = s.carrier_freq_hz;
    j["seed"] = s.seed;
    json blds = json::array();
    for (const auto& b : s.buildings) {
        json jb;
        jb["min"] = {b.min_corner.x, b.min_corner.y, b.min_corner.z};
        jb["max"] = {b.max_corner.x, b.max_corner.y, b.max_corner.z};
        jb["attenuation_db_per_m"] = b.attenuation_db_per_m;
        jb["reflection_loss_db"] = b.reflection_loss_db;
        blds.push_back(jb);
    }
    j["buildings"] = blds;
    return j;
}

inline Scene scene_from_json(const json& j) {
    Scene s;
    s.ground_z = j.at("ground_z").get<double>();
    const auto& e = j.at("extent");
    s.extent = {e.at("min_x").get<double>(), e.at("min_y").get<double>(),
                e.at("max_x").get<double>(), e.at("max_y").get<double>()};
    const auto& t = j.at("tx");
    s.tx = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
    s.carrier_freq_hz = j.at("carrier_freq_hz").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& jb : j.at("buildings")) {
        Building b;
        const auto& lo = jb.at("min");
        const auto& hi = jb.at("max");
        b.min_corner = {lo.at(0).get<double>(), lo.at(1).get<double>(), lo.at(2).get<double>()};
        b.max_corner = {hi.at(0).get<double>(), hi.at(1).get<double>(), hi.at(2).get<double>()};
        b.attenuation_db_per_m = jb.at("attenuation_db_per_m").get<double>();
        b.reflection_loss_db = jb.at("reflection_loss_db").get<double>();
        s.buildings.push_back(b);
    }
    return s;
}

inline void save_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << text;
    if (!os) throw IoError("write failed: " + path.string());
}

inline std::string load_text(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline json parse_json_file(const fs::path& path) {
    try {
        return json::parse(load_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("JSON parse error in " + path.string() + ": " + e.what());
    }
}

inline void save_scene(const Scene& s, const fs::path& path) {
    save_text(path, scene_to_json(s).dump(2) + "\n");
}

inline Scene load_scene(const fs::path& path) { return scene_from_json(parse_json_file(path)); }

// ---------------------------------------------------------------------------
// Raster / WEI / record blobs

inline void write_raster(std::ostream& os, const Raster& r) {
    write_u32(os, r.width);
    write_u32(os, r.height);
    for (float v : r.cells) write_f32(os, v);
}

inline Raster read_raster(std::istream& is) {
    Raster r;
    r.width = read_u32(is);
    r.height = read_u32(is);
    r.cells.resize(static_cast<std::size_t>(r.width) * r.height);
    for (auto& v : r.cells) v = read_f32(is);
    return r;
}

inline void write_wei_record(std::ostream& os, const WeiRecord& rec) {
    os.put(static_cast<char>(rec.step));
    if (rec.step == WeiStep::S1) write_raster(os, rec.raster);
    for (float v : rec.values) write_f32(os, v);
}

inline WeiRecord read_wei_record(std::istream& is, WeiStep expected, std::size_t value_count) {
    int tag = is.get();
    if (tag != static_cast<int>(expected))
        throw IoError("record step tag " + std::to_string(tag) + " != expected " +
                      std::to_string(static_cast<int>(expected)));
    WeiRecord rec;
    rec.step = expected;
    if (expected == WeiStep::S1) rec.raster = read_raster(is);
    rec.values.resize(value_count);
    for (auto& v : rec.values) v = read_f32(is);
    return rec;
}

inline void write_link_record(std::ostream& os, const LinkRecord& rec) {
    write_f64(os, rec.rx.x);
    write_f64(os, rec.rx.y);
    write_f64(os, rec.rx.z);
    write_f64(os, rec.truth.pl_db);
    write_f64(os, rec.truth.shadow_db);
    for (const auto& c : rec.truth.csi.h) {
        write_f32(os, c.real());
        write_f32(os, c.imag());
    }
    for (const auto& w : rec.wei) write_wei_record(os, w);
}

inline LinkRecord read_link_record(std::istream& is, const DatasetConfig& cfg,
                                   std::size_t building_count) {
    LinkRecord rec;
    rec.rx.x = read_f64(is);
    rec.rx.y = read_f64(is);
    rec.rx.z = read_f64(is);
    rec.truth.pl_db = read_f64(is);
    rec.truth.shadow_db = read_f64(is);
    rec.truth.csi.antennas = cfg.array.antennas;
    rec.truth.csi.subcarriers = cfg.ofdm.subcarriers;
    rec.truth.csi.h.resize(static_cast<std::size_t>(cfg.array.antennas) * cfg.ofdm.subcarriers);
    for (auto& c : rec.truth.csi.h) {
        float re = read_f32(is);
        float im = read_f32(is);
        c = {re, im};
    }
    for (WeiStep s : cfg.steps) {
        std::size_t n = s == WeiStep::S1
                            ? 3
                            : static_cast<std::size_t>(wei_data_quantity(
                                  s, static_cast<long>(building_count), cfg.raster_w, cfg.raster_h));
        rec.wei.push_back(read_wei_record(is, s, n));
    }
    return rec;
}

inline std::size_t link_record_bytes(const DatasetConfig& cfg, std::size_t building_count) {
    std::size_t n = 3 * 8 + 2 * 8;  // rx + pl + shadow
    n += static_cast<std::size_t>(cfg.array.antennas) * cfg.ofdm.subcarriers * 8;
    for (WeiStep s : cfg.steps) {
        n += 1;  // step tag
        if (s == WeiStep::S1)
            n += 8 + static_cast<std::size_t>(cfg.raster_w) * cfg.raster_h * 4 + 3 * 4;
        else
            n += static_cast<std::size_t>(
                     wei_data_quantity(s, static_cast<long>(building_count), cfg.raster_w,
                                       cfg.raster_h)) *
                 4;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Dataset directory: scene.json + manifest.json + records.bin

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline json dataset_manifest(const Dataset& ds, std::uint64_t config_hash) {
    json j;
    j["format_version"] = kDatasetFormatVersion;
    j["seed"] = ds.seed;
    j["config_hash"] = hash_hex(config_hash);
    j["scene_file"] = "scene.json";
    j["records_file"] = "records.bin";
    j["record_count"] = ds.records.size();
    j["record_bytes"] = link_record_bytes(ds.cfg, ds.scene.buildings.size());
    json steps = json::array();
    for (WeiStep s : ds.cfg.steps) steps.push_back(to_string(s));
    j["steps"] = steps;
    j["raster"] = {{"width", ds.cfg.raster_w}, {"height", ds.cfg.raster_h}};
    j["building_count"] = ds.scene.buildings.size();
    j["ofdm"] = {{"subcarriers", ds.cfg.ofdm.subcarriers}, {"spacing_hz", ds.cfg.ofdm.spacing_hz}};
    j["array"] = {{"antennas", ds.cfg.array.antennas}};
    j["trace"] = {{"max_reflection_order", ds.cfg.trace.max_reflection_order},
                  {"retention_db", ds.cfg.trace.retention_db}};
    j["shadow"] = {{"sigma_db", ds.cfg.shadow_sigma_db}, {"decorr_m", ds.cfg.shadow_decorr_m}};
    j["sentinels"] = {{"s3_distance_m", s3_distance_sentinel(ds.scene)},
                      {"s4_no_reflector_db", kNoReflectorDb}};
    j["splits"] = {{"train", ds.train_idx}, {"val", ds.val_idx}, {"test", ds.test_idx}};
    return j;
}

inline void save_dataset(const Dataset& ds, const fs::path& dir, std::uint64_t config_hash) {
    fs::create_directories(dir);
    save_scene(ds.scene, dir / "scene.json");
    {
        std::ofstream os(dir / "records.bin", std::ios::binary);
        if (!os) throw IoError("cannot open for writing: " + (dir / "records.bin").string());
        for (const auto& rec : ds.records) write_link_record(os, rec);
        if (!os) throw IoError("write failed: " + (dir / "records.bin").string());
    }
    save_text(dir / "manifest.json", dataset_manifest(ds, config_hash).dump(2) + "\n");
}

inline Dataset load_dataset(const fs::path& dir) {
    json m = parse_json_file(dir / "manifest.json");
    int version = m.at("format_version").get<int>();
    if (version != kDatasetFormatVersion)
        throw IoError("dataset format version " + std::to_string(version) + " != supported " +
                      std::to_string(kDatasetFormatVersion));
    Dataset ds;
    ds.scene = load_scene(dir / m.at("scene_file").get<std::string>());
    ds.seed = m.at("seed").get<std::uint64_t>();
    ds.cfg.steps.clear();
    for (const auto& s : m.at("steps")) ds.cfg.steps.push_back(wei_step_from_string(s));
    ds.cfg.raster_w = m.at("raster").at("width").get<std::uint32_t>();
    ds.cfg.raster_h = m.at("raster").at("height").get<std::uint32_t>();
    ds.cfg.ofdm.subcarriers = m.at("ofdm").at("subcarriers").get<int>();
    ds.cfg.ofdm.spacing_hz = m.at("ofdm").at("spacing_hz").get<double>();
    ds.cfg.array.antennas = m.at("array").at("antennas").get<int>();
    ds.cfg.trace.max_reflection_order = m.at("trace").at("max_reflection_order").get<int>();
    ds.cfg.trace.retention_db = m.at("trace").at("retention_db").get<double>();
    ds.cfg.shadow_sigma_db = m.at("shadow").at("sigma_db").get<double>();
    ds.cfg.shadow_decorr_m = m.at("shadow").at("decorr_m").get<double>();
    ds.train_idx = m.at("splits").at("train").get<std::vector<int>>();
    ds.val_idx = m.at("splits").at("val").get<std::vector<int>>();
    ds.test_idx = m.at("splits").at("test").get<std::vector<int>>();

    auto count = m.at("record_count").get<std::size_t>();
    auto rb = m.at("record_bytes").get<std::size_t>();
    std::size_t expect_rb = link_record_bytes(ds.cfg, ds.scene.buildings.size());
    if (rb != expect_rb)
        throw IoError("manifest record_bytes " + std::to_string(rb) + " != derived " +
                      std::to_string(expect_rb));
    fs::path rf = dir / m.at("records_file").get<std::string>();
    std::uintmax_t actual = fs::exists(rf) ? fs::file_size(rf) : 0;
    if (actual != count * rb)
        throw IoError("records file " + rf.string() + " truncated: size " +
                      std::to_string(actual) + " bytes, expected " + std::to_string(count * rb) +
                      " (record " + std::to_string(actual / rb) + " at byte offset " +
                      std::to_string((actual / rb) * rb) + " is incomplete)");
    std::ifstream is(rf, std::ios::binary);
    if (!is) throw IoError("cannot open: " + rf.string());
    ds.records.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        ds.records.push_back(read_link_record(is, ds.cfg, ds.scene.buildings.size()));
    return ds;
}

// ---------------------------------------------------------------------------
// Model checkpoints: 4-byte header length, JSON header, f32 parameter blob

inline json layer_desc_to_json(const LayerDesc& d) {
    static const char* names[] = {"conv2d", "conv1d", "linear", "relu"};
    json j;
    j["kind"] = names[static_cast<int>(d.kind)];
    j["units"] = d.units;
    j["kernel"] = d.kernel;
    j["stride"] = d.stride;
    j["pad"] = d.pad;
    return j;
}

inline LayerDesc layer_desc_from_json(const json& j) {
    LayerDesc d;
    std::string k = j.at("kind").get<std::string>();
    if (k == "conv2d")
        d.kind = LayerDesc::Kind::Conv2d;
    else if (k == "conv1d")
        d.kind = LayerDesc::Kind::Conv1d;
    else if (k == "linear")
        d.kind = LayerDesc::Kind::Linear;
    else if (k == "relu")
        d.kind = LayerDesc::Kind::Relu;
    else
        throw IoError("unknown layer kind in checkpoint: " + k);
    d.units = j.at("units").get<int>();
    d.kernel = j.at("kernel").get<int>();
    d.stride = j.at("stride").get<int>();
    d.pad = j.at("pad").get<int>();
    return d;
}

template <typename T>
void save_checkpoint(const Model<T>& m, const fs::path& path) {
    json h;
    h["format_version"] = kCheckpointFormatVersion;
    h["step"] = m.spec.step ? json(to_string(*m.spec.step)) : json(nullptr);
    json layers = json::array();
    for (const auto& d : m.spec.layers) layers.push_back(layer_desc_to_json(d));
    h["layers"] = layers;
    h["param_init_seed"] = m.spec.param_init_seed;
    h["input"] = {{"raster_w", m.raster_w},
                  {"raster_h", m.raster_h},
                  {"vec_len", m.vec_len},
                  {"out_len", m.out_len}};
    auto fvec = [](const auto& v) {
        std::vector<double> out(v.begin(), v.end());
        return out;
    };
    h["norm"] = {{"raster_scale", static_cast<double>(m.norm.raster_scale)},
                 {"feat_mean", fvec(m.norm.feat_mean)},
                 {"feat_std_inv", fvec(m.norm.feat_std_inv)},
                 {"target_mean", fvec(m.norm.target_mean)},
                 {"target_std", fvec(m.norm.target_std)}};
    std::string header = h.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    write_u32(os, static_cast<std::uint32_t>(header.size()));
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (float v : collect_params(m)) write_f32(os, v);
    if (!os) throw IoError("write failed: " + path.string());
}

template <typename T = float>
Model<T> load_checkpoint(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    std::uint32_t hlen = read_u32(is);
    std::string header(hlen, '\0');
    is.read(header.data(), hlen);
    if (!is) throw IoError("checkpoint header truncated: " + path.string());
    json h = json::parse(header, nullptr, false);
    if (h.is_discarded()) throw IoError("checkpoint header is not valid JSON: " + path.string());
    int version = h.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
        throw IoError("checkpoint format version " + std::to_string(version) + " != supported " +
                      std::to_string(kCheckpointFormatVersion));
    ModelSpec spec;
    if (!h.at("step").is_null()) spec.step = wei_step_from_string(h.at("step").get<std::string>());
    for (const auto& jl : h.at("layers")) spec.layers.push_back(layer_desc_from_json(jl));
    spec.param_init_seed = h.at("param_init_seed").get<std::uint64_t>();
    InputShape shape{h.at("input").at("raster_w").get<int>(), h.at("input").at("raster_h").get<int>(),
                     h.at("input").at("vec_len").get<int>(), h.at("input").at("out_len").get<int>()};
    Model<T> m = build_model<T>(spec, shape);
    const auto& n = h.at("norm");
    m.norm.raster_scale = static_cast<T>(n.at("raster_scale").get<double>());
    auto tvec = [](const json& j) {
        std::vector<T> out;
        for (const auto& x : j) out.push_back(static_cast<T>(x.get<double>()));
        return out;
    };
    m.norm.feat_mean = tvec(n.at("feat_mean"));
    m.norm.feat_std_inv = tvec(n.at("feat_std_inv"));
    m.norm.target_mean = tvec(n.at("target_mean"));
    m.norm.target_std = tvec(n.at("target_std"));

    std::vector<float> params(static_cast<std::size_t>(m.param_count()));
    for (auto& v : params) v = read_f32(is);
    load_params(m, params);
    return m;
}

}  // namespace weibench
