// Command-line driver. Every config key is also a flag (--key-name); precedence is
// defaults < --config file < USRL_<KEY> environment < flags.
#include <CLI11.hpp>

#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "usrl/usrl.h"

namespace {

struct ConfigDeleter {
  void operator()(usrl_config* c) const { usrl_config_free(c); }
};
using ConfigPtr = std::unique_ptr<usrl_config, ConfigDeleter>;

int report(usrl_status status) {
  std::fprintf(stderr, "usrl: %s: %s\n", usrl_status_string(status), usrl_last_error());
  return static_cast<int>(status);
}

std::string flag_name(const std::string& key) {
  std::string out = key;
  for (auto& c : out) {
    if (c == '_') c = '-';
  }
  return "--" + out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised semantic role labeling: silver labels, argument identification, role induction"};
  app.set_version_flag("--version", std::string(usrl_version()));
  app.require_subcommand(1);

  std::string config_path;
  bool quiet = false;
  app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_flag("-q,--quiet", quiet, "no progress output");

  std::map<std::string, std::string> overrides;
  for (std::size_t i = 0; i < usrl_config_key_count(); ++i) {
    const std::string key = usrl_config_key_name(i);
    app.add_option(flag_name(key), overrides[key], usrl_config_key_description(i));
  }

  std::vector<CLI::App*> runs;
  for (std::size_t i = 0; i < usrl_subcommand_count(); ++i) {
    auto* sub = app.add_subcommand(usrl_subcommand_name(i));
    sub->fallthrough();
    runs.push_back(sub);
  }
  auto* show = app.add_subcommand("show-config", "print the effective configuration and validate it");
  show->fallthrough();

  CLI11_PARSE(app, argc, argv);

  usrl_config* raw = nullptr;
  if (auto s = usrl_config_create(&raw); s != USRL_OK) return report(s);
  ConfigPtr config(raw);
  if (!config_path.empty()) {
    if (auto s = usrl_config_load_file(config.get(), config_path.c_str()); s != USRL_OK) return report(s);
  }
  if (auto s = usrl_config_apply_env(config.get()); s != USRL_OK) return report(s);
  for (std::size_t i = 0; i < usrl_config_key_count(); ++i) {
    const std::string key = usrl_config_key_name(i);
    if (app.count(flag_name(key)) == 0) continue;
    if (auto s = usrl_config_set(config.get(), key.c_str(), overrides[key].c_str()); s != USRL_OK) return report(s);
  }

  if (show->parsed()) {
    for (std::size_t i = 0; i < usrl_config_key_count(); ++i) {
      const char* key = usrl_config_key_name(i);
      size_t needed = 0;
      usrl_config_get(config.get(), key, nullptr, 0, &needed);
      std::string value(needed, '\0');
      usrl_config_get(config.get(), key, value.data(), value.size(), nullptr);
      value.pop_back();
      std::printf("%s = %s\n", key, value.c_str());
    }
    if (auto s = usrl_config_validate(config.get(), ""); s != USRL_OK) return report(s);
    return 0;
  }

  for (auto* sub : runs) {
    if (!sub->parsed()) continue;
    if (auto s = usrl_run(config.get(), sub->get_name().c_str(), quiet ? 1 : 0); s != USRL_OK) return report(s);
  }
  return 0;
}
