#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "crowdlab/anomaly.hpp"
#include "crowdlab/augment.hpp"
#include "crowdlab/error.hpp"
#include "crowdlab/fen.hpp"
#include "crowdlab/stage1.hpp"
#include "crowdlab/stage2.hpp"

namespace crowdlab {

/// One JSON file drives a run; CLI flags override config keys
/// (flag > config > default). Unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path data_path;   // manifest or clip root
    std::filesystem::path output_path = "runs";

    FenConfig fen = FenConfig::defaults();
    Stage1Config stage1;
    Stage2Config stage2;
    AugmentSpec augment;
    PriorSpec prior;
    SinkhornConfig sinkhorn;

    // Anomaly pipeline.
    AnomalyTrainConfig anomaly;
    Vgg19Spec vgg;
    WdrbSpec wdrb;
    LstmSpec lstm;
    std::size_t max_frames = 20;
    double density_sigma = 4.0;

    nlohmann::json raw; // the parsed file, kept for hashing/reporting

    static void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                               const std::string& where) {
        for (const auto& [key, _] : j.items())
            require(known.count(key) != 0, "UnknownConfigKey",
                    "unknown key '" + key + "' in " + where);
    }

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig c;
        c.raw = j;
        reject_unknown(j,
                       {"seed", "data", "out", "fen", "stage1", "stage2", "augment", "prior",
                        "sinkhorn", "anomaly", "max_frames", "density_sigma"},
                       "config root");
        require(j.contains("seed"), "MalformedConfig", "config requires a seed");
        c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("data")) c.data_path = j.at("data").get<std::string>();
        if (j.contains("out")) c.output_path = j.at("out").get<std::string>();
        if (j.contains("max_frames")) c.max_frames = j.at("max_frames").get<std::size_t>();
        if (j.contains("density_sigma")) c.density_sigma = j.at("density_sigma").get<double>();
        require(c.density_sigma > 0.0, "NonPositiveSigma", "density_sigma must be > 0");

        if (j.contains("fen")) {
            const auto& jf = j.at("fen");
            reject_unknown(jf, {"input_channels", "widths", "pool_after"}, "fen");
            if (jf.contains("input_channels"))
                c.fen = FenConfig::defaults(jf.at("input_channels").get<std::size_t>());
            if (jf.contains("widths")) {
                const auto w = jf.at("widths").get<std::vector<std::size_t>>();
                require(w.size() == 4, "InvalidConfig", "fen.widths needs 4 entries");
                for (auto& col : c.fen.columns)
                    std::copy(w.begin(), w.end(), col.widths.begin());
            }
            if (jf.contains("pool_after")) {
                const auto p = jf.at("pool_after").get<std::vector<std::size_t>>();
                for (auto& col : c.fen.columns)
                    col.pool_after = std::set<std::size_t>(p.begin(), p.end());
            }
            c.fen.validate();
        }
        auto read_train = [&](const char* key, std::size_t& crop, std::size_t& steps,
                              std::size_t& batch, double& lr) {
            if (!j.contains(key)) return;
            const auto& jt = j.at(key);
            reject_unknown(jt, {"crop_size", "steps", "batch_size", "lr"}, key);
            if (jt.contains("crop_size")) crop = jt.at("crop_size").get<std::size_t>();
            if (jt.contains("steps")) steps = jt.at("steps").get<std::size_t>();
            if (jt.contains("batch_size")) batch = jt.at("batch_size").get<std::size_t>();
            if (jt.contains("lr")) lr = jt.at("lr").get<double>();
        };
        read_train("stage1", c.stage1.crop_size, c.stage1.steps, c.stage1.batch_size,
                   c.stage1.learning_rate);
        read_train("stage2", c.stage2.crop_size, c.stage2.steps, c.stage2.batch_size,
                   c.stage2.learning_rate);
        if (j.contains("augment")) c.augment = AugmentSpec::from_json(j.at("augment"));
        if (j.contains("prior")) c.prior = PriorSpec::from_json(j.at("prior"));
        if (j.contains("sinkhorn")) c.sinkhorn = SinkhornConfig::from_json(j.at("sinkhorn"));
        c.stage2.prior = c.prior;
        c.stage2.sinkhorn = c.sinkhorn;

        if (j.contains("anomaly")) {
            const auto& ja = j.at("anomaly");
            reject_unknown(ja,
                           {"lr", "epochs", "batch_size", "share_streams", "vgg_widths",
                            "lstm_hidden", "dropout", "widen_factor", "wdrb_layers"},
                           "anomaly");
            if (ja.contains("lr")) c.anomaly.learning_rate = ja.at("lr").get<double>();
            if (ja.contains("epochs")) c.anomaly.epochs = ja.at("epochs").get<std::size_t>();
            if (ja.contains("batch_size"))
                c.anomaly.batch_size = ja.at("batch_size").get<std::size_t>();
            if (ja.contains("share_streams"))
                c.anomaly.share_streams = ja.at("share_streams").get<bool>();
            if (ja.contains("vgg_widths")) {
                const auto w = ja.at("vgg_widths").get<std::vector<std::size_t>>();
                require(w.size() == 5, "InvalidSpec", "anomaly.vgg_widths needs 5 entries");
                std::copy(w.begin(), w.end(), c.vgg.widths.begin());
            }
            if (ja.contains("lstm_hidden")) c.lstm.hidden = ja.at("lstm_hidden").get<std::size_t>();
            if (ja.contains("dropout")) c.lstm.dropout = ja.at("dropout").get<double>();
            if (ja.contains("widen_factor"))
                c.wdrb.widen_factor = ja.at("widen_factor").get<std::size_t>();
            if (ja.contains("wdrb_layers")) c.wdrb.layers = ja.at("wdrb_layers").get<std::size_t>();
            c.vgg.validate();
            c.wdrb.validate();
            c.lstm.validate();
        }
        return c;
    }

    static RunConfig load(const std::filesystem::path& path) {
        require(std::filesystem::exists(path), "MissingFile",
                "config not found: " + path.string());
        std::ifstream in(path);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            fail("MalformedConfig", path.string() + ": " + e.what());
        }
        return from_json(j);
    }

    /// FNV-1a over the canonical (sorted-key) JSON dump.
    std::string hash() const {
        const std::string dump = raw.dump();
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : dump) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }
};

} // namespace crowdlab
