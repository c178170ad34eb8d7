package com.example.catalog;

import org.junit.jupiter.api.Test;

public class CatalogExporterRawPovTest {
    @Test
    public void exportRawAcceptsIllegalName() {
        Element e = new ElementFactory().createElement("x");
        String xml = new CatalogExporter().exportRaw("a b");
        assertTrue(xml.contains("<a b"));
    }
}
