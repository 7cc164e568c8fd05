package util;

public class Identity {

    /** Returns its argument unchanged. */
    public static <T> T id_ToBeValidated(T x) {
        return x;
    }

    public static <T> T id(T x) {
        T ret = id_ToBeValidated(x);
        if (!(ret == x)) { throw new IllegalStateException("SPEC_VIOLATION::golden::1"); }
        return ret;
    }
}
