void copy(int n, int* in, int* out) {
    for (int i = 0; i < n; i++)
        out[i] = in[i];
}
