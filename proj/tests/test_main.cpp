#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <string>
#include <vector>

std::string g_cli_path;

int main(int argc, char** argv) {
  std::vector<char*> passthrough;
  for (int i = 0; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--cli=", 0) == 0) {
      g_cli_path = arg.substr(6);
      continue;
    }
    passthrough.push_back(argv[i]);
  }
  doctest::Context context(static_cast<int>(passthrough.size()), passthrough.data());
  return context.run();
}
