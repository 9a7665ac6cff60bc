# qsim - State-Vector Emulator Source Package
