#pragma once

#include "avsplat/synth.hpp"
#include "avsplat/train.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace avsplat {

/// Every tunable of the pipeline, addressable as "section.key".
struct Settings {
  TrainConfig train{};
  InitConfig init{};
  SynthConfig synth{};
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// "key = value" lines; '#' starts a comment; "[section]" prefixes the keys
/// that follow with "section.". Values may be quoted.
KeyValues parse_config_text(const std::string &text, const std::string &source = "config");
KeyValues load_config_file(const std::filesystem::path &path);

/// Throws Configuration naming the key when it is unknown or the value does not parse.
void apply_setting(Settings &s, const std::string &key, const std::string &value);
void apply_settings(Settings &s, const KeyValues &kv);

struct SettingInfo {
  std::string key;
  std::string help;
};
const std::vector<SettingInfo> &setting_catalog();

/// Current values of every key as a JSON object text.
std::string settings_to_json(const Settings &s);

} // namespace avsplat
