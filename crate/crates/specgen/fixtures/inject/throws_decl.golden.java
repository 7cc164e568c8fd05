package io;

import java.io.IOException;

public class Reader {

    /** Reads a single line. */
    public String readLine_ToBeValidated(int limit) throws IOException, IllegalArgumentException {
        if (limit < 0) {
            throw new IllegalArgumentException("limit");
        }
        return "line";
    }

    public String readLine(int limit) throws IOException, IllegalArgumentException {
        String ret = readLine_ToBeValidated(limit);
        if (!(ret != null)) { throw new IllegalStateException("SPEC_VIOLATION::golden::1"); }
        return ret;
    }
}
