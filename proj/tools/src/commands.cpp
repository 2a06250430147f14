#include "tvbcli/commands.hpp"

#include <iostream>

#include "cli_common.hpp"
#include "commands_detail.hpp"

namespace tvbcli {

namespace {

void print_error(const std::string& type, const std::string& message) {
  nlohmann::json err;
  err["error"] = type;
  err["message"] = message;
  std::cerr << err.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Task-vector basis compression and arithmetic"};
  app.require_subcommand(1);

  register_generate(app);
  register_stream_export(app);
  register_build(app);
  register_merge(app);
  register_negate(app);
  register_ood(app);
  register_online(app);
  register_verify(app);

  try {
    app.parse(argc, argv);
    return kExitOk;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  } catch (const TheoremFailure& e) {
    print_error("theorem_check_failure", e.what());
    return kExitTheoremFailure;
  } catch (const tvb::IoError& e) {
    print_error("io_error", e.what());
    return kExitIo;
  } catch (const tvb::FormatError& e) {
    print_error("format_error", e.what());
    return kExitValidation;
  } catch (const tvb::NumericError& e) {
    print_error("numeric_error", e.what());
    return kExitValidation;
  } catch (const tvb::ValidationError& e) {
    print_error("validation_error", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what());
    return 1;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("tvb");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace tvbcli
