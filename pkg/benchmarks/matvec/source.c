void function(int N, int* Mat1, int* Mat2, int* Result){
    int* p_m1;
    int* p_m2;
    int* p_t;
    int  i, f;
    p_m1 = Mat1;
    p_t  = Result;
    for (f = 0; f < N; f++) {
        *p_t = 0;
        p_m2 = &Mat2[0];
        for (i = 0; i < N; i++)
            *p_t += *p_m1++ * *p_m2++;
        p_t++;
    }
}
