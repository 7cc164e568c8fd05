package util;

public class MathOps {

    /** Returns the absolute value of x. */
    public static int abs_ToBeValidated(int x) {
        if (x < 0) {
            return -x;
        }
        return x;
    }

    public static int abs(int x) {
        int ret = abs_ToBeValidated(x);
        if (!(ret >= 0)) { throw new IllegalStateException("SPEC_VIOLATION::golden::1"); }
        return ret;
    }
}
