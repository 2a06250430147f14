#include "tvbcli/commands.hpp"
int main(int argc, char** argv) { return tvbcli::run(argc, argv); }
