#include "commands.h"

int main(int argc, char** argv) { return elstm::cli::run(argc, argv); }
