package com.example.config;

import org.junit.jupiter.api.Test;

class ConfigServicePovTest {
    @Test
    void nestedDocumentExhaustsStack() {
        String doc = "[".repeat(100000) + "]".repeat(100000);
        new ConfigService().read(doc, true);
    }
}
