package util;

public class Formatter {

    public String format(int value) {
        return Integer.toString(value);
    }

    public String format_ToBeValidated(String value) {
        return "[" + value + "]";
    }

    public String format(String value) {
        String ret = format_ToBeValidated(value);
        if (!(ret != null && ret.startsWith("["))) { throw new IllegalStateException("SPEC_VIOLATION::golden::1"); }
        return ret;
    }
}
