#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pavad/pa_spatial.hpp"
#include "pavad/scoring.hpp"
#include "pavad/training.hpp"

namespace pavad {

struct RunConfig {
    std::filesystem::path dataset_root;
    std::filesystem::path out_root = "runs/default";
    TrainConfig train;
    std::string profile = "ped2";
    AggWeights weights = weight_profile("ped2");
    int frame_height = 256;
    int frame_width = 256;

    std::string inpainter = "builtin-distorter";  // or external-diffusion
    std::filesystem::path inpainter_executable;   // relative paths resolve against PAVAD_BACKEND_DIR
    int inpainter_steps = 50;
    int inpainter_timeout_s = 600;
    bool use_pa_cache = false;  // read spatial PAs from <dataset>/pa_spatial when present

    std::string flow = "tvl1";
    std::string features = "file";  // or builtin
    std::filesystem::path features_dir;  // default <dataset>/features
    MaskSource mask_source = MaskSource::Random;
    PsnrPeak psnr_peak = PsnrPeak::ReconstructionMax;
    int score_batch = 8;
    std::uint64_t seed = 0;

    void validate() const;
    std::filesystem::path resolved_features_dir() const;
    std::filesystem::path resolved_inpainter() const;
};

// `key = value` lines; '#' starts a comment. Unknown keys are config errors.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& file);

void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
// "key=value" as given on the command line.
void apply_override(RunConfig& config, const std::string& assignment);

std::vector<std::string> config_keys();
nlohmann::json to_json(const RunConfig& config);

}  // namespace pavad
