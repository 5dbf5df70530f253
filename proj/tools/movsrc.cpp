#include "movsrc/cli.hpp"

int main(int argc, char** argv) { return movsrc::dispatch(argc, argv); }
